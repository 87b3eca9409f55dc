"""
LMI-block standard form

    maximize  c.x   subject to   S_j = G_j - sum_i x_i A_ij  is PSD,   j = 1..m,

its dual  minimize sum_j <G_j, Z_j>  s.t.  sum_j <A_ij, Z_j> = c_i,  Z_j PSD,  and the solver front door.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from src.exceptions import DimensionMismatchError, NonSymmetricError
from src.schemas import SolverSettings

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ConicBlock:
    """
    One LMI block: constant ``G`` of shape (k, k) and coefficients ``A`` of shape (num_vars, k, k).
    """

    G: np.ndarray
    A: np.ndarray
    name: str = ""

    def __post_init__(self):
        G = np.array(self.G, dtype=float)
        A = np.array(self.A, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise DimensionMismatchError(f"block {self.name!r}: constant term is not square {G.shape}")
        if A.ndim != 3 or A.shape[1:] != G.shape:
            raise DimensionMismatchError(f"block {self.name!r}: coefficient stack {A.shape} vs size {G.shape}")
        scale = max(1.0, float(np.abs(G).max(initial=0.0)), float(np.abs(A).max(initial=0.0)))
        if np.abs(G - G.T).max(initial=0.0) > SYMMETRY_TOL * scale or \
                np.abs(A - A.transpose(0, 2, 1)).max(initial=0.0) > SYMMETRY_TOL * scale:
            raise NonSymmetricError(f"block {self.name!r} has non-symmetric matrices")
        G.setflags(write=False)
        A.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "A", A)

    @property
    def size(self) -> int:
        return self.G.shape[0]

    def slack(self, x: np.ndarray) -> np.ndarray:
        return self.G - np.tensordot(x, self.A, axes=1)

    def adjoint(self, Z: np.ndarray) -> np.ndarray:
        """
        Vector (<A_i, Z>)_i.
        """
        return self.A.reshape(self.A.shape[0], -1) @ Z.reshape(-1)


@dataclass(frozen=True, eq=False)
class ConicProgram:
    num_vars: int
    objective: np.ndarray
    blocks: tuple[ConicBlock, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        c = np.array(self.objective, dtype=float).reshape(-1)
        if c.shape[0] != self.num_vars:
            raise DimensionMismatchError(f"objective has {c.shape[0]} entries for {self.num_vars} variables")
        for block in self.blocks:
            if block.A.shape[0] != self.num_vars:
                raise DimensionMismatchError(
                    f"block {block.name!r} has {block.A.shape[0]} coefficient matrices for {self.num_vars} variables")
        if self.labels and len(self.labels) != self.num_vars:
            raise DimensionMismatchError("one label per variable expected")
        c.setflags(write=False)
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "blocks", tuple(self.blocks))

    def slacks(self, x: np.ndarray) -> list[np.ndarray]:
        return [block.slack(x) for block in self.blocks]

    def adjoint(self, Zs: list[np.ndarray]) -> np.ndarray:
        return sum(block.adjoint(Z) for block, Z in zip(self.blocks, Zs))

    def dual_objective(self, Zs: list[np.ndarray]) -> float:
        return float(sum(np.vdot(block.G, Z) for block, Z in zip(self.blocks, Zs)))


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    MAX_ITERS = "max-iters"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True, eq=False)
class ConicSolution:
    x: np.ndarray
    Z: tuple[np.ndarray, ...]
    status: SolveStatus
    primal_res: float
    dual_res: float
    gap: float
    iterations: int
    primal_objective: float = 0.0
    dual_objective: float = 0.0
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


@dataclass(frozen=True)
class KKTReport:
    """
    Residuals recomputed from scratch. ``primal_res`` measures the LMI side (negative part of the slacks),
    ``dual_res`` the equality sum_j <A_ij, Z_j> = c_i, ``complementarity`` sum_j <S_j, Z_j>.
    """

    primal_res: float
    dual_res: float
    complementarity: float
    gap: float
    min_slack_eig: float
    min_dual_eig: float
    primal_objective: float
    dual_objective: float


def kkt_report(prog: ConicProgram, sol: ConicSolution) -> KKTReport:
    """
    Recomputes every optimality residual of a candidate solution without touching solver internals.

    :param prog: The program.
    :type prog: ConicProgram
    :param sol: Candidate primal point and dual multipliers.
    :type sol: ConicSolution
    :return: Residual record.
    :rtype: KKTReport
    """
    x = np.asarray(sol.x, dtype=float)
    slacks = prog.slacks(x)
    slack_eigs = [np.linalg.eigvalsh(S)[0] for S in slacks]
    dual_eigs = [np.linalg.eigvalsh(Z)[0] for Z in sol.Z]
    min_slack = float(min(slack_eigs, default=0.0))
    min_dual = float(min(dual_eigs, default=0.0))
    pobj = float(prog.objective @ x)
    dobj = prog.dual_objective(list(sol.Z))
    dual_res = float(np.linalg.norm(prog.adjoint(list(sol.Z)) - prog.objective) / (1.0 + np.linalg.norm(prog.objective)))
    complementarity = float(sum(np.vdot(S, Z) for S, Z in zip(slacks, sol.Z)))
    return KKTReport(
        primal_res=max(0.0, -min_slack),
        dual_res=dual_res,
        complementarity=complementarity,
        gap=abs(dobj - pobj) / (1.0 + abs(pobj) + abs(dobj)),
        min_slack_eig=min_slack,
        min_dual_eig=min_dual,
        primal_objective=pobj,
        dual_objective=dobj,
    )


def solve(prog: ConicProgram, options: Optional[SolverSettings] = None) -> ConicSolution:
    """
    Solves the program with the backend selected in ``options.backend`` (``settings.solver_backend`` by default).
    Every backend returns the same ConicSolution semantics; failures come back as a status, never as an exception.

    :param prog: The program.
    :type prog: ConicProgram
    :param options: Tolerances, iteration budget and backend.
    :type options: SolverSettings | None
    :return: Solution with status, residuals and last iterate.
    :rtype: ConicSolution
    """
    options = options or SolverSettings()
    if options.backend == "cvxopt":
        from src.solver.cvxopt_backend import solve_cvxopt
        return solve_cvxopt(prog, options)
    from src.solver.interior_point import InteriorPointSolver
    return InteriorPointSolver(options).solve(prog)


def _lower_triangle(M: np.ndarray) -> list[float]:
    rows, cols = np.tril_indices(M.shape[0])
    return [float(v) for v in M[rows, cols]]


def program_to_dict(prog: ConicProgram) -> dict:
    """
    Self-describing layout for cross-checking against external solvers: symmetric matrices are flattened as their
    lower triangle in row-major order.
    """
    return {
        "format": "lmi-blocks/v1",
        "sense": "maximize",
        "num_vars": prog.num_vars,
        "labels": list(prog.labels),
        "objective": [float(v) for v in prog.objective],
        "blocks": [
            {
                "name": block.name,
                "size": block.size,
                "constant": _lower_triangle(block.G),
                "coefficients": [_lower_triangle(A) for A in block.A],
            }
            for block in prog.blocks
        ],
    }


def dump_program(prog: ConicProgram, path: Path | str) -> None:
    Path(path).write_text(json.dumps(program_to_dict(prog), indent=1), encoding="utf-8")
    logger.info("conic program written to %s", path)
