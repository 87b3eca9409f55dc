"""
Run reports: the decomposition pipeline shared by ``decompose`` and ``reproduce`` (solve, certificate, optional
atom extraction) and the JSON / aligned-text renderings of its result.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from src.exceptions import ExtractionFailedError
from src.moments.core import riesz
from src.moments.models import BasisIndexer, MomentSequence
from src.schemas import AtomReport, DecomposeOptions, MomentRow, RunReport
from src.services import atoms, decomposition
from src.services.decomposition import DecompositionProblem, DecompositionSolution

logger = logging.getLogger(__name__)

REPORT_ORDER = 4
MASS_FLOOR = 1e-5

# (x1^2 + x2^2 - 1)^2
CIRCLE_RESIDUAL = {(4, 0): 1.0, (0, 4): 1.0, (2, 2): 2.0, (2, 0): -2.0, (0, 2): -2.0, (0, 0): 1.0}


def relative_errors(values, reference) -> list[Optional[float]]:
    """
    |approx - ref| / |ref| per entry; None where the reference vanishes.
    """
    return [abs(a - r) / abs(r) if r != 0 else None for a, r in zip(values, reference)]


def max_relative_error(row: MomentRow) -> Optional[float]:
    errors = [e for e in (row.relative_errors or []) if e is not None]
    return max(errors) if errors else None


def moment_row(name: str, z: MomentSequence, order: int, reference: Optional[MomentSequence] = None,
               normalize: bool = True) -> MomentRow:
    """
    Moments of ``z`` up to ``order`` (divided by z_0 when ``normalize``), with relative errors against the
    normalized reference when one is given.
    """
    indexer = BasisIndexer(z.n, order)
    values = z.values[: indexer.size]
    if normalize:
        values = values / z.values[0]
    row = MomentRow(name=name, alphas=[list(alpha) for alpha in indexer], values=[float(v) for v in values])
    if reference is not None:
        ref = reference.values[: indexer.size] / reference.values[0]
        row.reference = [float(v) for v in ref]
        row.relative_errors = relative_errors(row.values, row.reference)
    return row


@dataclass
class DecomposeRequest:
    mu: MomentSequence
    lam: MomentSequence
    gamma: float
    order: int
    options: DecomposeOptions = field(default_factory=DecomposeOptions)
    atoms: bool = False
    ref_nu: Optional[MomentSequence] = None
    ref_psi: Optional[MomentSequence] = None
    report_order: int = REPORT_ORDER
    circle_residual: bool = False


def _atom_report(v: MomentSequence, d: int, rank_p: int, notes: list[str]) -> Optional[AtomReport]:
    flat = atoms.flatness_scan(v, d, rank_p)
    if flat is None:
        notes.append(f"no flat extension found up to order {d} (rank threshold 1e-{rank_p}), reporting raw moments")
        return None
    k, r = flat
    if r == 0:
        notes.append("no singular part detected")
        return None
    try:
        found = atoms.extract_atoms(v, k + 1, r)
    except ExtractionFailedError as err:
        logger.warning("atom extraction failed: %s", err.detail)
        notes.append(f"atom extraction failed: {err.detail}; reporting raw moments")
        return None
    return AtomReport(points=found.points.tolist(), weights=found.weights.tolist(), residual=found.residual,
                      flat_order=k, rank=r)


def decompose_and_report(request: DecomposeRequest) -> tuple[DecompositionSolution, RunReport]:
    """
    Solves the relaxation described by ``request`` and assembles its report: normalized y and v rows (with
    relative errors when references are given), the certificate check, the solution invariants and optionally the
    candidate atoms of v.

    :param request: Data, order, options and reporting switches.
    :type request: DecomposeRequest
    :return: The solution and its report.
    :rtype: tuple[DecompositionSolution, RunReport]
    :raises SolverFailureError: If the solver does not converge.
    """
    options = request.options
    problem = DecompositionProblem(request.mu, request.lam, request.gamma, request.order)
    solution = decomposition.solve_decomposition(problem, options)
    order = min(request.report_order, 2 * request.order)
    notes: list[str] = []

    rows = [moment_row("y/y0", solution.y, order, request.ref_nu)]
    if solution.v.mass > MASS_FLOOR:
        rows.append(moment_row("v/v0", solution.v, order, request.ref_psi))
    else:
        notes.append("no singular part detected")
        rows.append(moment_row("v", solution.v, order, normalize=False))

    check = decomposition.check_solution(problem, solution)
    diagnostics = {
        "feasibility_residual": check.feasibility_residual,
        "bound_excess": check.bound_excess,
        **{f"min_eig_{name}": value for name, value in check.min_eigenvalues.items()},
    }
    for row in rows:
        worst = max_relative_error(row)
        if worst is not None:
            diagnostics[f"max_rel_error_{row.name}"] = worst
    if request.circle_residual and problem.d >= 2 and solution.v.mass > MASS_FLOOR:
        diagnostics["circle_residual"] = riesz(solution.v.normalized(), CIRCLE_RESIDUAL)

    certificate = decomposition.verify_certificate(solution, problem.mu, problem.lam, problem.gamma, problem.d)
    atom_report = None
    if request.atoms and "no singular part detected" not in notes:
        atom_report = _atom_report(solution.v, problem.d, options.rank_p, notes)

    solver = options.solver
    report = RunReport(
        gamma=problem.gamma,
        order=problem.d,
        tolerances={"eps_feas": solver.eps_feas, "eps_gap": solver.eps_gap, "eps_psd": solver.eps_psd},
        conditioned=solution.conditioned,
        rho_d=solution.rho_d,
        rows=rows,
        atoms=atom_report,
        notes=notes,
        diagnostics=diagnostics,
        certificate=certificate,
        solver={"status": solution.stats.status, "iterations": solution.stats.iterations,
                "primal_res": solution.stats.primal_res, "dual_res": solution.stats.dual_res,
                "gap": solution.stats.gap, "backend": solver.backend},
    )
    return solution, report


def _alpha_label(alpha) -> str:
    return "x^" + "".join(str(e) for e in alpha) if len(alpha) > 1 else f"x^{alpha[0]}"


def render_table(report: RunReport, title: str = "") -> str:
    """
    Aligned text rendering: one block per moment row with values and, when available, relative errors in percent.
    """
    lines = []
    if title:
        lines.append(title)
    lines.append(f"gamma = {report.gamma:g}   d = {report.order}   rho_{report.order} = {report.rho_d:.4f}"
                 + ("   (conditioned)" if report.conditioned else ""))
    for row in report.rows:
        headers = [_alpha_label(alpha) for alpha in row.alphas]
        width = max(10, *(len(h) + 1 for h in headers))
        label_width = max(len(row.name), len("rel.err")) + 2
        lines.append(" " * label_width + "".join(h.rjust(width) for h in headers))
        lines.append(row.name.ljust(label_width) + "".join(f"{v:.5f}".rjust(width) for v in row.values))
        if row.reference is not None:
            lines.append("ref".ljust(label_width) + "".join(f"{v:.5f}".rjust(width) for v in row.reference))
        if row.relative_errors is not None:
            cells = ["-" if e is None else f"{100 * e:.2f}%" for e in row.relative_errors]
            lines.append("rel.err".ljust(label_width) + "".join(c.rjust(width) for c in cells))
    if report.atoms is not None:
        lines.append(f"{report.atoms.label} (flat at order {report.atoms.flat_order}, rank {report.atoms.rank}, "
                     f"residual {report.atoms.residual:.2e}):")
        for point, weight in zip(report.atoms.points, report.atoms.weights):
            lines.append(f"  ({', '.join(f'{x:.6f}' for x in point)})  weight {weight:.6f}")
    if report.certificate is not None:
        cert = report.certificate
        lines.append(f"certificate: identity {cert.identity_residual:.2e}, gap {cert.gap:.2e}, "
                     f"{'passed' if cert.passed else 'FAILED'}")
    if "circle_residual" in report.diagnostics:
        lines.append(f"L_(v/v0)((x1^2+x2^2-1)^2) = {report.diagnostics['circle_residual']:.4f}")
    lines.extend(f"note: {note}" for note in report.notes)
    return "\n".join(lines)


def write_report(report: RunReport, path: Path | str) -> None:
    Path(path).write_text(report.model_dump_json(indent=1) + "\n", encoding="utf-8")
    logger.info("report written to %s", path)
