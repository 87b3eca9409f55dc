"""
Finite atomic support of the singular part: numerical rank by an eigenvalue gap, the flat extension scan and the
multiplication matrix extraction of atoms from a flat moment matrix.
"""
import logging
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
from scipy import linalg, optimize

from src.conf.config import settings
from src.exceptions import DegreeTooLowError, ExtractionFailedError, NonSymmetricError
from src.moments.core import build_moment_matrix
from src.moments.models import BasisIndexer, MomentSequence

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-8
COMPLEX_TOL = 1e-6
WEIGHT_TOL = 1e-8


@dataclass(frozen=True)
class RankProfile:
    """
    Eigenvalues in ascending order, the rank kept and the ratio between the largest dropped magnitude and the
    smallest kept eigenvalue (1.0 when nothing is dropped, 0.0 when everything is).
    """

    eigenvalues: tuple[float, ...]
    detected_rank: int
    gap_ratio: float
    threshold_p: int


def numerical_rank(M: np.ndarray, p: Optional[int] = None, zero_tol: Optional[float] = None) -> RankProfile:
    """
    Splits the spectrum of ``M`` into kept eigenvalues A and zeroed ones B with max|B| / min A < 10^-p. Among the
    valid splits, scanning from the largest eigenvalue down, the one keeping most eigenvalues wins; kept
    eigenvalues must stay above ``zero_tol`` times the largest one. Without a valid split the rank is full.

    :param M: Symmetric matrix.
    :type M: np.ndarray
    :param p: Threshold exponent, ``settings.rank_threshold_p`` by default.
    :type p: int | None
    :param zero_tol: Relative floor of kept eigenvalues and absolute floor of a nonzero matrix,
        ``settings.rank_zero_tol`` by default.
    :type zero_tol: float | None
    :return: The rank profile.
    :rtype: RankProfile
    :raises NonSymmetricError: If M is not symmetric.
    """
    p = settings.rank_threshold_p if p is None else p
    zero_tol = settings.rank_zero_tol if zero_tol is None else zero_tol
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or \
            not np.allclose(M, M.T, rtol=1e-10, atol=1e-12 * max(1.0, float(np.abs(M).max(initial=0.0)))):
        raise NonSymmetricError("rank detection needs a symmetric matrix")
    eigenvalues = linalg.eigvalsh(M)
    size = eigenvalues.size
    profile = tuple(float(e) for e in eigenvalues)
    top = float(eigenvalues[-1]) if size else 0.0
    if size == 0 or top <= zero_tol:
        return RankProfile(profile, 0, 0.0, p)
    descending = eigenvalues[::-1]
    threshold = 10.0 ** (-p)
    rank, ratio = size, 1.0
    for r in range(size - 1, 0, -1):
        kept = descending[r - 1]
        if kept <= zero_tol * top:
            continue
        candidate = float(np.abs(descending[r:]).max()) / kept
        if candidate < threshold:
            rank, ratio = r, candidate
            break
    return RankProfile(profile, rank, ratio, p)


def flatness_scan(v: MomentSequence, d: int, p: Optional[int] = None) -> Optional[tuple[int, int]]:
    """
    Smallest k <= d - 1 with rank M_k(v) = rank M_{k+1}(v), returned as (k, rank), or None.
    """
    if v.max_degree < 2 * d:
        raise DegreeTooLowError(f"flatness scan to order {d} needs moments up to degree {2 * d}")
    ranks = [numerical_rank(build_moment_matrix(v, k).entries, p).detected_rank for k in range(d + 1)]
    logger.debug("numerical ranks of M_0..M_%d: %s", d, ranks)
    for k in range(d):
        if ranks[k] == ranks[k + 1]:
            return k, ranks[k]
    return None


@dataclass(frozen=True, eq=False)
class AtomSet:
    points: np.ndarray
    weights: np.ndarray
    residual: float

    @property
    def count(self) -> int:
        return self.weights.size


def _column_echelon(V: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """
    Reduced echelon form U of V (s x r) with U[pivots] = I and V = U V[pivots]; pivots favour low rows, i.e. low
    degree monomials.
    """
    R = V.T.copy()
    r, s = R.shape
    tol = PIVOT_TOL * max(1.0, float(np.abs(R).max(initial=0.0)))
    pivots = []
    row = 0
    for col in range(s):
        if row == r:
            break
        best = row + int(np.argmax(np.abs(R[row:, col])))
        if abs(R[best, col]) <= tol:
            R[row:, col] = 0.0
            continue
        R[[row, best]] = R[[best, row]]
        R[row] /= R[row, col]
        others = np.arange(r) != row
        R[others] -= np.outer(R[others, col], R[row])
        pivots.append(col)
        row += 1
    if len(pivots) != r:
        raise ExtractionFailedError(f"echelon form found {len(pivots)} pivots for rank {r}")
    return R.T, pivots


def _random_combination(n: int, seed: int) -> np.ndarray:
    c = np.random.default_rng(seed).uniform(0.1, 1.0, n)
    return c / c.sum()


def extract_atoms(v: MomentSequence, k: int, r: int, seed: Optional[int] = None) -> AtomSet:
    """
    Recovers r atoms from a flat moment matrix M_k(v):

    factor M_k(v) ~ V V^T with the top r eigenpairs, reduce V to echelon form with pivot monomials b_j, read the
    multiplication by x_i on the pivot basis from the rows of x_i b_j, diagonalize a random convex combination of
    these matrices by a real Schur decomposition and read coordinates off the Schur vectors. Weights come from a
    nonnegative least squares fit of the moments up to degree 2k.

    :param v: Moment sequence covering degree 2k.
    :type v: MomentSequence
    :param k: Order of the factored moment matrix.
    :type k: int
    :param r: Rank, at least 1.
    :type r: int
    :param seed: Seed of the random combination, ``settings.moment_split_seed`` by default.
    :type seed: int | None
    :return: Points, weights and the recomputed moment residual.
    :rtype: AtomSet
    :raises ExtractionFailedError: If a shift leaves the factored basis, eigenvalues are complex or weights come out
        negative.
    """
    if r < 1:
        raise ExtractionFailedError("nothing to extract from a rank 0 moment matrix")
    seed = settings.moment_split_seed if seed is None else seed
    M = build_moment_matrix(v, k).entries
    indexer = BasisIndexer(v.n, k)
    if r > indexer.size:
        raise ExtractionFailedError(f"rank {r} exceeds the size {indexer.size} of M_{k}")
    eigenvalues, eigenvectors = linalg.eigh(M)
    top = eigenvalues[-r:]
    if top[0] <= 0:
        raise ExtractionFailedError(f"M_{k} has fewer than {r} positive eigenvalues")
    V = eigenvectors[:, -r:] * np.sqrt(top)
    U, pivots = _column_echelon(V)

    multiplication = []
    for i in range(v.n):
        shift = [0] * v.n
        shift[i] = 1
        rows = []
        for j in pivots:
            target = indexer.indices[j].shift(shift)
            if target.total_degree > k:
                raise ExtractionFailedError(
                    f"shift of pivot monomial {tuple(indexer.indices[j])} by x{i + 1} leaves degree {k}")
            rows.append(U[indexer.index(target)])
        multiplication.append(np.array(rows))

    c = _random_combination(v.n, seed)
    N = sum(ci * Ni for ci, Ni in zip(c, multiplication))
    T, Q = linalg.schur(N, output="real")
    subdiagonal = np.abs(np.diag(T, -1))
    if subdiagonal.size and subdiagonal.max() > COMPLEX_TOL * max(1.0, float(np.abs(T).max())):
        raise ExtractionFailedError("multiplication matrices have complex eigenvalues")
    points = np.array([[Q[:, j] @ Ni @ Q[:, j] for Ni in multiplication] for j in range(r)])
    points = points[np.lexsort(points.T[::-1])]

    full = BasisIndexer(v.n, 2 * k)
    vandermonde = np.array([[np.prod(point ** np.asarray(alpha)) for point in points] for alpha in full])
    target = v.values[: full.size]
    unconstrained = linalg.lstsq(vandermonde, target)[0]
    if unconstrained.min() < -WEIGHT_TOL * max(1.0, float(np.abs(unconstrained).max())):
        raise ExtractionFailedError(f"negative atom weight {unconstrained.min():.3e}")
    weights, _ = optimize.nnls(vandermonde, target)
    residual = float(np.abs(vandermonde @ weights - target).max())
    logger.info("extracted %d atoms from M_%d, moment residual %.2e", r, k, residual)
    return AtomSet(points, weights, residual)


@dataclass(frozen=True)
class EigenGapRow:
    d: int
    eigenvalues: tuple[float, ...]
    rank: int
    smallest_kept: float
    largest_dropped: float


@dataclass(frozen=True)
class EigenGapReport:
    """
    Spectrum of M_{d0}(v^d) along the hierarchy. ``bottom_shrinking`` and ``top_stable`` are evidence about the
    candidate d0, never a verdict.
    """

    d0: int
    rows: list[EigenGapRow]
    bottom_shrinking: bool
    top_stable: bool


def eigen_gap_monitor(v_by_order: Mapping[int, MomentSequence], d0: int, p: Optional[int] = None) -> EigenGapReport:
    """
    Tracks the eigenvalues of M_{d0}(v^d) as d grows: the kept group should stay bounded away from zero (above half
    its first value) while the dropped group shrinks.

    :param v_by_order: Singular part moments per relaxation order d >= d0.
    :type v_by_order: Mapping[int, MomentSequence]
    :param d0: Candidate order.
    :type d0: int
    :param p: Threshold exponent of the rank rule.
    :type p: int | None
    :return: One row per order with the evidence flags.
    :rtype: EigenGapReport
    """
    rows = []
    for d in sorted(v_by_order):
        if d < d0:
            continue
        profile = numerical_rank(build_moment_matrix(v_by_order[d], d0).entries, p)
        descending = sorted(profile.eigenvalues, reverse=True)
        kept = descending[: profile.detected_rank]
        dropped = descending[profile.detected_rank:]
        rows.append(EigenGapRow(d, tuple(descending), profile.detected_rank,
                                min(kept, default=0.0), max((abs(e) for e in dropped), default=0.0)))
    bottom = [row.largest_dropped for row in rows]
    bottom_shrinking = all(b <= a for a, b in zip(bottom, bottom[1:]))
    kept_floor = [row.smallest_kept for row in rows]
    top_stable = bool(kept_floor) and all(value >= kept_floor[0] / 2 for value in kept_floor)
    return EigenGapReport(d0, rows, bottom_shrinking, top_stable)
