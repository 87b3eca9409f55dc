"""
Conditioning of the decomposition program: every moment-matrix block is rewritten in the basis of polynomials
orthonormal with respect to lambda, which turns the lambda block into gamma * I.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from src.conf.config import settings
from src.exceptions import DimensionMismatchError, NotPositiveDefiniteError
from src.moments.core import build_moment_matrix
from src.moments.models import MomentSequence
from src.solver.conic import ConicBlock, ConicProgram

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """
    Row a of ``L`` holds the monomial coefficients of the a-th orthonormal polynomial, so that
    L M_d(lambda) L^T = I.
    """

    d: int
    L: np.ndarray
    source: str = ""
    orthogonality_error: float = 0.0

    @property
    def size(self) -> int:
        return self.L.shape[0]


def orthonormal_basis(lam: MomentSequence, d: int, eps_pd: float | None = None) -> OrthonormalBasis:
    """
    Orthonormal polynomials of degree at most ``d`` for lambda, from the Cholesky factor of M_d(lambda) and a
    triangular inverse. A second Cholesky pass on L M L^T re-orthonormalizes the rows and keeps L lower triangular.

    :param lam: Moments of lambda, up to degree 2d.
    :type lam: MomentSequence
    :param d: Degree.
    :type d: int
    :param eps_pd: Smallest admissible eigenvalue of M_d(lambda), ``settings.eps_pd`` by default.
    :type eps_pd: float | None
    :return: The change of basis.
    :rtype: OrthonormalBasis
    :raises NotPositiveDefiniteError: If M_d(lambda) is singular up to eps_pd.
    """
    eps_pd = settings.eps_pd if eps_pd is None else eps_pd
    M = build_moment_matrix(lam, d).entries
    smallest = float(linalg.eigvalsh(M)[0])
    if smallest <= eps_pd:
        raise NotPositiveDefiniteError(
            f"M_{d}({lam.label or 'lambda'}) is not positive definite, smallest eigenvalue {smallest:.3e}", smallest)
    identity = np.eye(M.shape[0])
    C = linalg.cholesky(M, lower=True)
    L = linalg.solve_triangular(C, identity, lower=True)
    E = L @ M @ L.T
    C2 = linalg.cholesky(0.5 * (E + E.T), lower=True)
    L = linalg.solve_triangular(C2, L, lower=True)
    error = float(np.abs(L @ M @ L.T - identity).max())
    if error > settings.eps_orth:
        logger.warning("orthonormal basis of degree %d deviates from identity by %.2e", d, error)
    L.setflags(write=False)
    return OrthonormalBasis(d, L, lam.label, error)


def transform_program(prog: ConicProgram, basis: OrthonormalBasis) -> ConicProgram:
    """
    Applies the congruence B -> L B L^T to the constant and every coefficient of every block. The feasible set in
    the decision vector is unchanged.

    :param prog: Program assembled by the decomposition service.
    :type prog: ConicProgram
    :param basis: Change of basis of the same degree.
    :type basis: OrthonormalBasis
    :return: The conditioned program.
    :rtype: ConicProgram
    :raises DimensionMismatchError: If a block size differs from the basis size.
    """
    L = basis.L
    blocks = []
    for block in prog.blocks:
        if block.size != basis.size:
            raise DimensionMismatchError(f"block {block.name!r} has size {block.size}, basis has {basis.size}")
        G = L @ block.G @ L.T
        A = np.einsum("ab,ibc,dc->iad", L, block.A, L)
        blocks.append(ConicBlock(0.5 * (G + G.T), 0.5 * (A + A.transpose(0, 2, 1)), block.name))
    return ConicProgram(prog.num_vars, prog.objective, tuple(blocks), prog.labels)


def dual_to_monomial(Z: np.ndarray, basis: OrthonormalBasis) -> np.ndarray:
    """
    Dual multiplier of the conditioned program mapped back to the monomial basis, L^T Z L.
    """
    return basis.L.T @ Z @ basis.L


@dataclass(frozen=True)
class BlockCondition:
    name: str
    before: float
    after: float


def _condition(G: np.ndarray) -> float:
    if not np.any(G):
        return np.inf
    return float(np.linalg.cond(G))


def condition_report(prog: ConicProgram, transformed: ConicProgram) -> list[BlockCondition]:
    """
    2-norm condition numbers of each block's constant term before and after the transform (inf for a zero block).
    """
    if len(prog.blocks) != len(transformed.blocks):
        raise DimensionMismatchError("programs have different block counts")
    return [BlockCondition(a.name, _condition(a.G), _condition(b.G)) for a, b in zip(prog.blocks, transformed.blocks)]
