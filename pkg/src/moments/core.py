"""
Moment bookkeeping: basis enumeration, moment matrices, the B_alpha expansion, the Riesz functional and the two
moment-theoretic diagnostics (Carleman partial sums, density bound certificate).
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy import linalg

from src.conf.config import settings
from src.exceptions import DegreeTooLowError, DimensionMismatchError
from src.moments.models import BasisIndexer, MomentMatrix, MomentSequence, MultiIndex

logger = logging.getLogger(__name__)

Polynomial = Mapping[tuple, float]


def enumerate_basis(n: int, d: int) -> BasisIndexer:
    """
    Builds the graded lexicographic indexer of the monomials of degree at most ``d`` in ``n`` variables.

    :param n: Ambient dimension, at least 1.
    :type n: int
    :param d: Maximal total degree, nonnegative.
    :type d: int
    :return: Indexer of size binomial(n + d, n).
    :rtype: BasisIndexer
    """
    return BasisIndexer(n, d)


@lru_cache(maxsize=64)
def addition_table(n: int, d: int) -> np.ndarray:
    """
    Integer matrix T with T[i, j] = position of alpha_i + alpha_j in the degree 2d order.

    :param n: Ambient dimension.
    :type n: int
    :param d: Degree of the moment matrix.
    :type d: int
    :return: Read-only array of shape (s(d), s(d)).
    :rtype: np.ndarray
    """
    rows = BasisIndexer(n, d)
    full = BasisIndexer(n, 2 * d)
    table = np.empty((rows.size, rows.size), dtype=int)
    for i, alpha in enumerate(rows):
        for j in range(i, rows.size):
            table[i, j] = table[j, i] = full.index(alpha.shift(rows.indices[j]))
    table.setflags(write=False)
    return table


def build_moment_matrix(z: MomentSequence, d: int) -> MomentMatrix:
    """
    Builds the moment matrix M_d(z) whose entry (alpha, beta) is z_{alpha+beta}.

    :param z: Moment sequence covering degree 2d.
    :type z: MomentSequence
    :param d: Order of the moment matrix.
    :type d: int
    :return: Symmetric s(d) x s(d) moment matrix.
    :rtype: MomentMatrix
    :raises DegreeTooLowError: If z stops before degree 2d.
    """
    if z.max_degree < 2 * d:
        raise DegreeTooLowError(f"M_{d} needs moments up to degree {2 * d}, sequence stops at {z.max_degree}")
    table = addition_table(z.n, d)
    return MomentMatrix(d, BasisIndexer(z.n, d), z.values[table])


def basis_expansion_matrices(n: int, d: int) -> np.ndarray:
    """
    Stack of the 0/1 matrices B_alpha, alpha of degree at most 2d, such that v_d(x) v_d(x)^T = sum B_alpha x^alpha
    and M_d(z) = sum z_alpha B_alpha.

    :param n: Ambient dimension.
    :type n: int
    :param d: Order of the moment matrix.
    :type d: int
    :return: Array of shape (s(2d), s(d), s(d)); slice ``[t]`` is B for the t-th multi-index of degree <= 2d.
    :rtype: np.ndarray
    """
    table = addition_table(n, d)
    count = BasisIndexer(n, 2 * d).size
    stack = (table[None, :, :] == np.arange(count)[:, None, None]).astype(float)
    stack.setflags(write=False)
    return stack


def polynomial_product(p: Polynomial, q: Polynomial) -> dict[MultiIndex, float]:
    """
    Coefficient map of the product p*q.
    """
    out: dict[MultiIndex, float] = {}
    for alpha, a in p.items():
        for beta, b in q.items():
            key = MultiIndex(alpha).shift(beta)
            out[key] = out.get(key, 0.0) + a * b
    return out


def riesz(z: MomentSequence, poly: Polynomial) -> float:
    """
    Riesz functional L_z(f) = sum_alpha f_alpha z_alpha.

    :param z: Moment sequence.
    :type z: MomentSequence
    :param poly: Coefficient map multi-index -> coefficient.
    :type poly: Mapping[tuple, float]
    :return: The value of L_z at poly.
    :rtype: float
    :raises DegreeTooLowError: If a monomial of poly is beyond z.max_degree.
    """
    total = 0.0
    for alpha, coefficient in poly.items():
        if len(alpha) != z.n:
            raise DimensionMismatchError(f"monomial {tuple(alpha)} is not in {z.n} variables")
        if sum(alpha) > z.max_degree:
            raise DegreeTooLowError(f"monomial {tuple(alpha)} exceeds moment degree {z.max_degree}")
        total += coefficient * z[alpha]
    return total


def carleman_diagnostic(z: MomentSequence, K: int) -> list[list[float]]:
    """
    Partial sums of the Carleman series sum_k L_z(x_i^{2k})^{-1/2k}, one list of K sums per coordinate.
    Divergence cannot be decided from finitely many terms, so the caller judges the growth. A nonpositive even
    moment makes the term (and every later partial sum) ``math.inf``.

    :param z: Moment sequence covering degree 2K.
    :type z: MomentSequence
    :param K: Number of terms.
    :type K: int
    :return: ``sums[i][k-1]`` is the k-th partial sum of coordinate i.
    :rtype: list[list[float]]
    """
    if z.max_degree < 2 * K:
        raise DegreeTooLowError(f"{K} Carleman terms need moments up to degree {2 * K}")
    sums = []
    for i in range(z.n):
        partial, running = [], 0.0
        for k in range(1, K + 1):
            alpha = [0] * z.n
            alpha[i] = 2 * k
            moment = z[alpha]
            running += moment ** (-1.0 / (2 * k)) if moment > 0 else math.inf
            partial.append(running)
        sums.append(partial)
    return sums


@dataclass(frozen=True)
class DensityBoundReport:
    holds: bool
    min_eig: float


def density_bound_check(nu: MomentSequence, lam: MomentSequence, gamma: float, d: int,
                        eps_psd: float | None = None) -> DensityBoundReport:
    """
    Checks M_d(nu) <= gamma * M_d(lambda) in the PSD order, the finite-order certificate that nu has a density with
    respect to lambda bounded by gamma.

    :param nu: Candidate absolutely continuous part.
    :type nu: MomentSequence
    :param lam: Reference measure.
    :type lam: MomentSequence
    :param gamma: Density bound.
    :type gamma: float
    :param d: Order of the moment matrices.
    :type d: int
    :param eps_psd: PSD tolerance, ``settings.eps_psd`` by default.
    :type eps_psd: float | None
    :return: Whether the bound holds and the smallest eigenvalue of gamma*M_d(lambda) - M_d(nu).
    :rtype: DensityBoundReport
    """
    if nu.n != lam.n:
        raise DimensionMismatchError(f"nu lives in dimension {nu.n}, lambda in {lam.n}")
    eps_psd = settings.eps_psd if eps_psd is None else eps_psd
    gap = gamma * build_moment_matrix(lam, d).entries - build_moment_matrix(nu, d).entries
    min_eig = float(linalg.eigvalsh(gap)[0])
    logger.debug("density bound at d=%d: min eigenvalue %.3e", d, min_eig)
    return DensityBoundReport(holds=min_eig >= -eps_psd, min_eig=min_eig)
