"""
Infeasible-start primal-dual path following for the LMI-block standard form, with Nesterov-Todd scaling and a
Mehrotra predictor-corrector. Dense linear algebra throughout.

The Schur complement M = sum_j A_j^T (W_j kron W_j) A_j is never formed. With W_j = G_j G_j^T it equals T^T T
where column i of T stacks svec(G_j^T A_ij G_j) over the blocks, so the search direction comes from a QR
factorization of T followed by refinement against the equality sum_j <A_ij, dZ_j> = r_i. Near the optimum cond(T)
grows like 1/mu; factoring T^T T explicitly would square that.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from src.schemas import SolverSettings
from src.solver.conic import ConicProgram, ConicSolution, SolveStatus

logger = logging.getLogger(__name__)

# iterations without a better merit before the method gives up and returns its best iterate
STALL_ITERS = 8
REFINEMENT_STEPS = 2


class _Breakdown(Exception):
    pass


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def _chol(M: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(M, lower=True)
    except linalg.LinAlgError as err:
        raise _Breakdown(str(err))


def _nt_scaling(Z: np.ndarray, S: np.ndarray):
    """
    G with G^{-1} Z G^{-T} = G^T S G = diag(lam); W = G G^T is the NT scaling point (W S W = Z).
    """
    Lz = _chol(Z)
    Ls = _chol(S)
    _, lam, Vt = linalg.svd(Ls.T @ Lz)
    if lam.min() <= 0 or not np.all(np.isfinite(lam)):
        raise _Breakdown("degenerate scaling")
    G = Lz @ Vt.T / np.sqrt(lam)
    return G, lam


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    """
    Largest alpha with X + alpha dX PSD (inf when dX keeps X inside for every alpha).
    """
    L = _chol(X)
    Linv = linalg.solve_triangular(L, np.eye(X.shape[0]), lower=True)
    smallest = linalg.eigvalsh(_sym(Linv @ dX @ Linv.T))[0]
    return np.inf if smallest >= 0 else -1.0 / smallest


class _Svec:
    """
    Isometric half-vectorization of symmetric k x k matrices: <X, Y> = svec(X) . svec(Y).
    """

    def __init__(self, k: int):
        self.rows, self.cols = np.triu_indices(k)
        self.weights = np.where(self.rows == self.cols, 1.0, np.sqrt(2.0))

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return X[..., self.rows, self.cols] * self.weights


@dataclass
class _Iterate:
    x: np.ndarray
    Zs: list
    Ss: list
    iteration: int
    rel_p: float
    rel_d: float
    rel_gap: float
    merit: float


class _ScaledSystem:
    """
    Normal equations of one Newton step in the NT-scaled space, where Z and S both become diag(lam):

        dZ~ + dS~ = Rc~,   dS~ = G^T Rd G - sum_i dx_i G^T A_i G,   sum_j <G_j^T A_ij G_j, dZ~_j> = rp_i
    """

    def __init__(self, A_blocks, scalings, svecs, regularization: float):
        self.Gs = [G for G, _ in scalings]
        self.At = [_sym(G.T @ A @ G) for G, A in zip(self.Gs, A_blocks)]
        self.T = np.concatenate([svec(At).T for svec, At in zip(svecs, self.At)], axis=0)
        self.svecs = svecs
        m = self.T.shape[1]
        scale = max(1.0, float(np.max(np.sum(self.T ** 2, axis=0), initial=0.0)))
        rows = np.vstack([self.T, np.sqrt(regularization * scale) * np.eye(m)]) if regularization > 0 else self.T
        R = np.linalg.qr(rows, mode="r")
        if R.shape[0] < m or not np.all(np.isfinite(R)) or np.min(np.abs(np.diag(R)), initial=np.inf) == 0.0:
            raise _Breakdown("singular Schur complement")
        self.R = R

    def _normal_solve(self, rhs: np.ndarray) -> np.ndarray:
        z = linalg.solve_triangular(self.R, rhs, trans="T")
        return linalg.solve_triangular(self.R, z)

    def adjoint(self, Xt: list) -> np.ndarray:
        return self.T.T @ np.concatenate([svec(X) for svec, X in zip(self.svecs, Xt)])

    def direction(self, rp, rds, rcs_scaled, A_blocks):
        h = [Rc - G.T @ rd @ G for Rc, G, rd in zip(rcs_scaled, self.Gs, rds)]
        dx = self._normal_solve(rp - self.adjoint(h))
        for _ in range(REFINEMENT_STEPS):
            dZt = [hj + np.tensordot(dx, At, axes=1) for hj, At in zip(h, self.At)]
            dx = dx + self._normal_solve(rp - self.adjoint(dZt))
        dZt = [_sym(hj + np.tensordot(dx, At, axes=1)) for hj, At in zip(h, self.At)]
        if not np.all(np.isfinite(dx)):
            raise _Breakdown("non-finite search direction")
        dZs = [_sym(G @ dZ @ G.T) for G, dZ in zip(self.Gs, dZt)]
        dSs = [_sym(rd - np.tensordot(dx, A, axes=1)) for rd, A in zip(rds, A_blocks)]
        return dx, dSs, dZs, dZt


class InteriorPointSolver:
    """
    Built-in conic backend.

    Attributes:
    options (SolverSettings): tolerances, iteration budget, fraction to boundary, initial scaling and the static
    regularization of the Schur complement.
    """

    def __init__(self, options: SolverSettings | None = None):
        self.options = options or SolverSettings()

    def _initial_point(self, prog: ConicProgram):
        c = prog.objective
        Zs, Ss = [], []
        for block in prog.blocks:
            k = block.size
            a_norms = np.linalg.norm(block.A.reshape(block.A.shape[0], -1), axis=1)
            g_norm = np.linalg.norm(block.G)
            xi = max(1.0, np.sqrt(k), k * float(np.max((1.0 + np.abs(c)) / (1.0 + a_norms), initial=1.0)))
            eta = max(1.0, (1.0 + max(g_norm, float(a_norms.max(initial=0.0)))) / np.sqrt(k))
            scale = self.options.init_scale
            Zs.append(scale * xi * np.eye(k))
            Ss.append(scale * eta * np.eye(k))
        return np.zeros(prog.num_vars), Zs, Ss

    def solve(self, prog: ConicProgram) -> ConicSolution:
        """
        Runs the predictor-corrector iteration until the relative residuals and relative gap meet the tolerances.
        When the budget is spent, the factorizations break down or the merit stops improving, the best iterate seen
        is returned with a non-optimal status.

        :param prog: Program in LMI-block standard form.
        :type prog: ConicProgram
        :return: Solution with status, residuals, iteration count and the complementarity history.
        :rtype: ConicSolution
        """
        opts = self.options
        A_blocks = [block.A for block in prog.blocks]
        G_blocks = [block.G for block in prog.blocks]
        svecs = [_Svec(block.size) for block in prog.blocks]
        c = prog.objective
        total_size = sum(block.size for block in prog.blocks)
        c_norm = 1.0 + np.linalg.norm(c)
        g_norm = 1.0 + np.sqrt(sum(np.sum(G ** 2) for G in G_blocks))

        x, Zs, Ss = self._initial_point(prog)
        status = SolveStatus.MAX_ITERS
        history = []
        iteration = 0
        best = None

        def residuals(x, Zs, Ss):
            rp = c - prog.adjoint(Zs)
            rds = [G - S - np.tensordot(x, A, axes=1) for G, S, A in zip(G_blocks, Ss, A_blocks)]
            return rp, rds

        try:
            for iteration in range(opts.max_iters + 1):
                rp, rds = residuals(x, Zs, Ss)
                mu = sum(np.vdot(Z, S) for Z, S in zip(Zs, Ss)) / total_size
                pobj = float(c @ x)
                dobj = prog.dual_objective(Zs)
                rel_p = float(np.linalg.norm(rp) / c_norm)
                rel_d = float(np.sqrt(sum(np.sum(r ** 2) for r in rds)) / g_norm)
                rel_gap = abs(dobj - pobj) / (1.0 + abs(pobj) + abs(dobj))
                rel_comp = mu * total_size / (1.0 + abs(pobj) + abs(dobj))
                history.append(float(mu * total_size))
                logger.debug("ipm %3d: pobj %.10e dobj %.10e pres %.2e dres %.2e gap %.2e",
                             iteration, pobj, dobj, rel_p, rel_d, rel_gap)
                merit = max(rel_p / opts.eps_feas, rel_d / opts.eps_feas, max(rel_gap, rel_comp) / opts.eps_gap)
                if best is None or merit < best.merit:
                    best = _Iterate(x, Zs, Ss, iteration, rel_p, rel_d, rel_gap, merit)
                if merit <= 1.0:
                    status = SolveStatus.OPTIMAL
                    break
                if iteration == opts.max_iters:
                    break
                if iteration - best.iteration >= STALL_ITERS:
                    raise _Breakdown(f"no progress since iteration {best.iteration}")

                scalings = [_nt_scaling(Z, S) for Z, S in zip(Zs, Ss)]
                system = _ScaledSystem(A_blocks, scalings, svecs, opts.regularization)

                def step_lengths(dZs, dSs):
                    az = min(1.0, opts.step_fraction * min(_max_step(Z, dZ) for Z, dZ in zip(Zs, dZs)))
                    as_ = min(1.0, opts.step_fraction * min(_max_step(S, dS) for S, dS in zip(Ss, dSs)))
                    return az, as_

                # predictor: Rc~ = -diag(lam)
                _, dS_a, dZ_a, dZt_a = system.direction(rp, rds, [-np.diag(lam) for _, lam in scalings], A_blocks)
                az, as_ = step_lengths(dZ_a, dS_a)
                mu_aff = sum(np.vdot(Z + az * dZ, S + as_ * dS)
                             for Z, dZ, S, dS in zip(Zs, dZ_a, Ss, dS_a)) / total_size
                sigma = min(1.0, max(0.0, mu_aff / mu) ** 3)

                # corrector with the second order term, in the scaled space where Z and S are both diag(lam)
                rcs = []
                for (G, lam), dZt, dS in zip(scalings, dZt_a, dS_a):
                    dSt = G.T @ dS @ G
                    R = sigma * mu * np.eye(lam.size) - np.diag(lam ** 2) - _sym(dZt @ dSt)
                    rcs.append(_sym(2.0 * R / (lam[:, None] + lam[None, :])))
                dx, dSs, dZs, _ = system.direction(rp, rds, rcs, A_blocks)
                az, as_ = step_lengths(dZs, dSs)

                # keep the complementarity from growing by more than 10% on a step
                for _ in range(30):
                    mu_new = sum(np.vdot(Z + az * dZ, S + as_ * dS)
                                 for Z, dZ, S, dS in zip(Zs, dZs, Ss, dSs)) / total_size
                    if mu_new <= 1.1 * mu:
                        break
                    az, as_ = 0.5 * az, 0.5 * as_

                if max(az, as_) < 1e-12:
                    raise _Breakdown("step length collapsed")
                x = x + as_ * dx
                Ss = [_sym(S + as_ * dS) for S, dS in zip(Ss, dSs)]
                Zs = [_sym(Z + az * dZ) for Z, dZ in zip(Zs, dZs)]
                if not (np.all(np.isfinite(x)) and all(np.all(np.isfinite(Z)) for Z in Zs)):
                    raise _Breakdown("non-finite iterate")
        except _Breakdown as err:
            logger.warning("interior point method stopped at iteration %d: %s", iteration, err)
            status = SolveStatus.NUMERICAL_FAILURE

        if status is not SolveStatus.OPTIMAL and best is not None:
            logger.info("returning the best iterate, from iteration %d", best.iteration)
            x, Zs = best.x, best.Zs
        solution = ConicSolution(
            x=x,
            Z=tuple(Zs),
            status=status,
            primal_res=float(best.rel_d),
            dual_res=float(best.rel_p),
            gap=float(best.rel_gap),
            iterations=iteration,
            primal_objective=float(c @ x),
            dual_objective=prog.dual_objective(Zs),
            history=tuple(history),
        )
        log = logger.info if solution.optimal else logger.warning
        log("ipm finished: %s after %d iterations, objective %.10f, gap %.2e",
            status.value, iteration, solution.primal_objective, best.rel_gap)
        return solution
