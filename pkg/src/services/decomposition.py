"""
The truncated decomposition program: maximize y_0 over moment sequences y with

    M_d(y) >= 0,    M_d(mu) - M_d(y) >= 0,    gamma M_d(lambda) - M_d(y) >= 0,

whose optimum approaches the moments of the largest part of mu with density at most gamma w.r.t. lambda. The
slack sequences v = mu - y and u = gamma lambda - y are eliminated, y is the only decision vector.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from src.conf.config import settings
from src.exceptions import (DegreeTooLowError, DimensionMismatchError, InvalidProblemError, MomentError,
                            NotPositiveDefiniteError, SolverFailureError)
from src.moments.core import basis_expansion_matrices, build_moment_matrix
from src.moments.models import BasisIndexer, MomentSequence
from src.schemas import CertificateReport, DecomposeOptions
from src.services import orthonormal
from src.solver import conic
from src.solver.conic import ConicBlock, ConicProgram, ConicSolution

logger = logging.getLogger(__name__)

BLOCK_NAMES = ("moment", "mu", "lambda")


@dataclass(frozen=True, eq=False)
class DecompositionProblem:
    """
    Data of one relaxation: mu and lambda truncated to degree 2d, mu normalized to a probability measure unless
    ``normalize_mu`` is off.
    """

    mu: MomentSequence
    lam: MomentSequence
    gamma: float
    d: int
    normalize_mu: bool = field(default_factory=lambda: settings.normalize_mu)

    def __post_init__(self):
        if self.mu.n != self.lam.n:
            raise DimensionMismatchError(f"mu lives in dimension {self.mu.n}, lambda in {self.lam.n}")
        if self.d < 0:
            raise InvalidProblemError(f"relaxation order must be nonnegative, got {self.d}")
        if not self.gamma > 0:
            raise InvalidProblemError(f"gamma must be positive, got {self.gamma}")
        for name, z in (("mu", self.mu), ("lambda", self.lam)):
            if z.max_degree < 2 * self.d:
                raise DegreeTooLowError(f"order {self.d} needs {name} moments up to degree {2 * self.d}, "
                                        f"got {z.max_degree}")
        mu = self.mu.truncate(2 * self.d)
        if self.normalize_mu:
            if not mu.mass > 0:
                raise InvalidProblemError(f"cannot normalize mu with mass {mu.mass}")
            mu = mu.normalized()
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", self.lam.truncate(2 * self.d))

    @property
    def n(self) -> int:
        return self.mu.n


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """
    Gram matrices of the SOS polynomials p, q and sigma with p + q - 1 = sigma, in the monomial basis.
    """

    gram_p: np.ndarray
    gram_q: np.ndarray
    gram_sigma: np.ndarray
    dual_value: float


@dataclass(frozen=True)
class SolverStats:
    status: str
    iterations: int
    primal_res: float
    dual_res: float
    gap: float


@dataclass(frozen=True, eq=False)
class DecompositionSolution:
    d: int
    gamma: float
    y: MomentSequence
    v: MomentSequence
    u: MomentSequence
    rho_d: float
    dual: DualCertificate
    stats: SolverStats
    conditioned: bool = False


def build_primal(problem: DecompositionProblem) -> ConicProgram:
    """
    Assembles the three LMI blocks as affine maps of y through the B_alpha matrices. The objective picks y_0.

    :param problem: Relaxation data.
    :type problem: DecompositionProblem
    :return: Program with s(2d) variables and three blocks of size s(d).
    :rtype: ConicProgram
    """
    n, d = problem.n, problem.d
    B = basis_expansion_matrices(n, d)
    objective = np.zeros(B.shape[0])
    objective[0] = 1.0
    blocks = (
        ConicBlock(np.zeros(B.shape[1:]), -B, BLOCK_NAMES[0]),
        ConicBlock(build_moment_matrix(problem.mu, d).entries, B, BLOCK_NAMES[1]),
        ConicBlock(problem.gamma * build_moment_matrix(problem.lam, d).entries, B, BLOCK_NAMES[2]),
    )
    labels = tuple(str(tuple(alpha)) for alpha in BasisIndexer(n, 2 * d))
    return ConicProgram(B.shape[0], objective, blocks, labels)


def _certificate(problem: DecompositionProblem, Zs) -> DualCertificate:
    gram_sigma, gram_p, gram_q = (0.5 * (Z + Z.T) for Z in Zs)
    dual_value = float(np.vdot(build_moment_matrix(problem.mu, problem.d).entries, gram_p)
                       + problem.gamma * np.vdot(build_moment_matrix(problem.lam, problem.d).entries, gram_q))
    return DualCertificate(gram_p, gram_q, gram_sigma, dual_value)


def solve_decomposition(problem: DecompositionProblem, options: Optional[DecomposeOptions] = None) -> \
        DecompositionSolution:
    """
    Solves one relaxation. With ``options.condition`` the program is first rewritten in the lambda-orthonormal
    basis; the decision vector and so the recovered moments are the same, the dual Grams are mapped back to the
    monomial basis. When M_d(lambda) is too close to singular for the basis the solve falls back to the monomial
    basis with a warning and the solution reports ``conditioned=False``.

    :param problem: Relaxation data.
    :type problem: DecompositionProblem
    :param options: Solver settings and conditioning switch.
    :type options: DecomposeOptions | None
    :return: y, v, u, rho_d, the dual certificate and solver statistics.
    :rtype: DecompositionSolution
    :raises SolverFailureError: If the solver stops without an optimal status; the last iterate is attached.
    """
    options = options or DecomposeOptions()
    if not problem.lam.mass > 0:
        raise InvalidProblemError("lambda must have positive mass")
    prog = build_primal(problem)
    basis = None
    if options.condition:
        try:
            basis = orthonormal.orthonormal_basis(problem.lam, problem.d)
        except NotPositiveDefiniteError as err:
            logger.warning("order %d: %s; solving in the monomial basis", problem.d, err.detail)
        else:
            prog = orthonormal.transform_program(prog, basis)
    logger.info("solving order %d relaxation: %d variables, blocks of size %d%s", problem.d, prog.num_vars,
                prog.blocks[0].size, " (conditioned)" if basis else "")
    result = conic.solve(prog, options.solver)
    if not result.optimal:
        raise SolverFailureError(
            f"order {problem.d} relaxation: solver stopped with status {result.status.value} after "
            f"{result.iterations} iterations (gap {result.gap:.2e}, residuals {result.primal_res:.2e}/"
            f"{result.dual_res:.2e})", solution=result)
    Zs = list(result.Z)
    if basis is not None:
        Zs = [orthonormal.dual_to_monomial(Z, basis) for Z in Zs]
    return _assemble(problem, result, Zs, conditioned=basis is not None)


def _assemble(problem: DecompositionProblem, result: ConicSolution, Zs, conditioned: bool) -> DecompositionSolution:
    y = MomentSequence(problem.n, 2 * problem.d, result.x, "y")
    v = (problem.mu - y).relabel("v")
    u = (problem.gamma * problem.lam - y).relabel("u")
    stats = SolverStats(result.status.value, result.iterations, result.primal_res, result.dual_res, result.gap)
    return DecompositionSolution(problem.d, problem.gamma, y, v, u, y.mass, _certificate(problem, Zs), stats,
                                 conditioned)


@dataclass(frozen=True)
class HierarchyLevel:
    d: int
    solution: Optional[DecompositionSolution] = None
    error: Optional[MomentError] = None


@dataclass(frozen=True)
class HierarchyResult:
    levels: list[HierarchyLevel]
    violations: list[tuple[int, int]]

    @property
    def monotone(self) -> bool:
        return not self.violations

    @property
    def solutions(self) -> list[DecompositionSolution]:
        return [level.solution for level in self.levels if level.solution is not None]


def solve_hierarchy(mu: MomentSequence, lam: MomentSequence, gamma: float, d_list: Iterable[int],
                    options: Optional[DecomposeOptions] = None, normalize_mu: Optional[bool] = None,
                    max_workers: int = 1) -> HierarchyResult:
    """
    Solves the relaxations of every order in ``d_list``. A failing level is recorded and the others go on.
    Relaxations tighten with the order, so rho_d >= rho_d' - eps_gap is checked for every solved pair d < d'.

    :param mu: Moments of mu, up to degree 2 max(d_list).
    :type mu: MomentSequence
    :param lam: Moments of lambda.
    :type lam: MomentSequence
    :param gamma: Density bound.
    :type gamma: float
    :param d_list: Orders to solve.
    :type d_list: Iterable[int]
    :param options: Solver settings and conditioning switch.
    :type options: DecomposeOptions | None
    :param normalize_mu: Overrides ``settings.normalize_mu``.
    :type normalize_mu: bool | None
    :param max_workers: Levels solved concurrently.
    :type max_workers: int
    :return: One level per order, sorted, and the pairs violating monotonicity.
    :rtype: HierarchyResult
    """
    orders = sorted(set(d_list))
    options = options or DecomposeOptions()
    normalize = settings.normalize_mu if normalize_mu is None else normalize_mu

    def run(d: int) -> HierarchyLevel:
        try:
            problem = DecompositionProblem(mu, lam, gamma, d, normalize)
            return HierarchyLevel(d, solution=solve_decomposition(problem, options))
        except SolverFailureError as err:
            logger.warning("order %d failed: %s", d, err.detail)
            return HierarchyLevel(d, error=err)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            levels = list(pool.map(run, orders))
    else:
        levels = [run(d) for d in orders]

    eps_gap = options.solver.eps_gap
    solved = [level.solution for level in levels if level.solution is not None]
    violations = [(a.d, b.d) for i, a in enumerate(solved) for b in solved[i + 1:] if a.rho_d < b.rho_d - eps_gap]
    for d_low, d_high in violations:
        logger.warning("rho_%d < rho_%d: relaxations should tighten with the order", d_low, d_high)
    return HierarchyResult(levels, violations)


def verify_certificate(sol: DecompositionSolution, mu: MomentSequence, lam: MomentSequence, gamma: float, d: int,
                       tol: float | None = None, eps_psd: float | None = None) -> CertificateReport:
    """
    Checks the dual certificate: the coefficients of p + q - 1 - sigma (contractions of the Grams with B_alpha)
    vanish, the Grams are PSD and the dual value matches rho_d.

    :param sol: A decomposition solution.
    :type sol: DecompositionSolution
    :param mu: Moments of mu as used by the solve (normalized if the solve normalized).
    :type mu: MomentSequence
    :param lam: Moments of lambda.
    :type lam: MomentSequence
    :param gamma: Density bound.
    :type gamma: float
    :param d: Relaxation order.
    :type d: int
    :param tol: Tolerance on the identity residual and the gap, ``settings.eps_gap`` by default.
    :type tol: float | None
    :param eps_psd: PSD tolerance, ``settings.eps_psd`` by default.
    :type eps_psd: float | None
    :return: Residual magnitudes and the verdict.
    :rtype: CertificateReport
    """
    tol = settings.eps_gap if tol is None else tol
    eps_psd = settings.eps_psd if eps_psd is None else eps_psd
    cert = sol.dual
    B = basis_expansion_matrices(mu.n, d)
    coefficients = np.einsum("aij,ij->a", B, cert.gram_p + cert.gram_q - cert.gram_sigma)
    coefficients[0] -= 1.0
    identity_residual = float(np.abs(coefficients).max())
    min_eig = float(min(np.linalg.eigvalsh(G)[0] for G in (cert.gram_p, cert.gram_q, cert.gram_sigma)))
    dual_value = float(np.vdot(build_moment_matrix(mu, d).entries, cert.gram_p)
                       + gamma * np.vdot(build_moment_matrix(lam, d).entries, cert.gram_q))
    gap = abs(dual_value - sol.rho_d)
    passed = identity_residual <= tol and min_eig >= -eps_psd and gap <= tol
    logger.info("certificate at order %d: identity %.2e, min gram eig %.2e, gap %.2e -> %s",
                d, identity_residual, min_eig, gap, "ok" if passed else "FAILED")
    return CertificateReport(identity_residual=identity_residual, min_gram_eigenvalue=min_eig,
                             dual_value=dual_value, gap=gap, passed=passed)


def bound_constants(mu: MomentSequence, lam: MomentSequence, gamma: float, d: int) -> tuple[float, float]:
    """
    tau_1 = max(mu_0, max_i int x_i^{2d} dmu) and tau_2 = gamma max(lambda_0, max_i int x_i^{2d} dlambda), the
    bounds on |y_alpha|, |v_alpha| (tau_1) and |u_alpha| (tau_2) for |alpha| <= 2d.
    """
    def tau(z: MomentSequence) -> float:
        values = [z.mass]
        for i in range(z.n):
            alpha = [0] * z.n
            alpha[i] = 2 * d
            values.append(z[alpha])
        return max(values)

    return tau(mu), gamma * tau(lam)


@dataclass(frozen=True)
class SolutionCheck:
    feasibility_residual: float
    min_eigenvalues: dict[str, float]
    bound_excess: float

    def holds(self, eps_feas: float, eps_psd: float) -> bool:
        return self.feasibility_residual <= eps_feas and self.bound_excess <= eps_feas and \
            min(self.min_eigenvalues.values()) >= -eps_psd


def check_solution(problem: DecompositionProblem, sol: DecompositionSolution) -> SolutionCheck:
    """
    Recomputes the invariants of a solution: the eliminated equalities, PSD-ness of M_d(y), M_d(v), M_d(u), and
    the moment bounds tau_1, tau_2.
    """
    feasibility = max(
        float(np.abs(sol.y.values + sol.v.values - problem.mu.values).max()),
        float(np.abs(sol.y.values + sol.u.values - problem.gamma * problem.lam.values).max()),
    )
    eigs = {z.label: build_moment_matrix(z, problem.d).min_eigenvalue() for z in (sol.y, sol.v, sol.u)}
    tau1, tau2 = bound_constants(problem.mu, problem.lam, problem.gamma, problem.d)
    excess = max(
        float(np.abs(sol.y.values).max()) - tau1,
        float(np.abs(sol.v.values).max()) - tau1,
        float(np.abs(sol.u.values).max()) - tau2,
    )
    return SolutionCheck(feasibility, eigs, max(excess, 0.0))
