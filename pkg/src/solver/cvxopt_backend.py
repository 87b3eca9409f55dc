"""
Adapter to ``cvxopt.solvers.sdp``. cvxopt minimizes, so the objective is negated; its ``zs`` multipliers are the
dual matrices of the LMI-block form unchanged.
"""
import logging

import numpy as np

from src.schemas import SolverSettings
from src.solver.conic import ConicProgram, ConicSolution, SolveStatus

logger = logging.getLogger(__name__)


def solve_cvxopt(prog: ConicProgram, options: SolverSettings) -> ConicSolution:
    """
    Solves the program with cvxopt, installed through the ``cvxopt`` extra.

    :param prog: The program.
    :type prog: ConicProgram
    :param options: Tolerances and iteration budget.
    :type options: SolverSettings
    :return: Solution with the same semantics as the built-in backend.
    :rtype: ConicSolution
    """
    from cvxopt import matrix, solvers

    c = matrix(-np.asarray(prog.objective, dtype=float))
    # column i of Gs holds vec(A_i) column-major; the matrices are symmetric so the order does not matter
    Gs = [matrix(block.A.reshape(prog.num_vars, -1).T.copy()) for block in prog.blocks]
    hs = [matrix(np.array(block.G)) for block in prog.blocks]
    solver_options = {
        "show_progress": logger.isEnabledFor(logging.DEBUG),
        "maxiters": options.max_iters,
        "abstol": options.eps_gap,
        "reltol": options.eps_gap,
        "feastol": options.eps_feas,
    }
    try:
        result = solvers.sdp(c, Gs=Gs, hs=hs, options=solver_options)
    except (ArithmeticError, ValueError) as err:
        logger.warning("cvxopt failed: %s", err)
        return ConicSolution(x=np.zeros(prog.num_vars), Z=tuple(np.zeros_like(b.G) for b in prog.blocks),
                             status=SolveStatus.NUMERICAL_FAILURE, primal_res=np.inf, dual_res=np.inf,
                             gap=np.inf, iterations=0)

    x = np.array(result["x"]).reshape(-1) if result["x"] is not None else np.zeros(prog.num_vars)
    Zs = tuple(np.array(z) for z in result["zs"]) if result["zs"] is not None else \
        tuple(np.zeros_like(b.G) for b in prog.blocks)
    status = SolveStatus.OPTIMAL if result["status"] == "optimal" else SolveStatus.MAX_ITERS
    pobj = float(prog.objective @ x)
    dobj = prog.dual_objective(list(Zs))
    logger.info("cvxopt finished: %s after %d iterations, objective %.10f",
                result["status"], result.get("iterations", 0), pobj)
    return ConicSolution(
        x=x,
        Z=Zs,
        status=status,
        primal_res=float(result.get("primal infeasibility") or 0.0),
        dual_res=float(result.get("dual infeasibility") or 0.0),
        gap=abs(dobj - pobj) / (1.0 + abs(pobj) + abs(dobj)),
        iterations=int(result.get("iterations", 0)),
        primal_objective=pobj,
        dual_objective=dobj,
    )
