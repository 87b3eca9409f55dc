import argparse
import json
import logging
from pathlib import Path

from src.exceptions import MomentFileError
from src.moments.core import density_bound_check
from src.moments.measures import exact_moments
from src.moments.models import MomentSequence
from src.schemas import DecomposeOptions, SolverSettings
from src.services import atoms, decomposition, moment_files, orthonormal, reports
from src.services.spec_parser import load_spec
from src.solver import conic

logger = logging.getLogger(__name__)


def add_solver_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("solver")
    group.add_argument("--backend", choices=["builtin", "cvxopt"], help="conic solver backend")
    group.add_argument("--max-iters", type=int, help="iteration budget")
    group.add_argument("--eps-gap", type=float, help="relative duality gap tolerance")
    group.add_argument("--eps-feas", type=float, help="relative feasibility tolerance")
    group.add_argument("--rank-p", type=int, help="rank threshold exponent p (eigenvalues below 10^-p are zero)")


def decompose_options(args: argparse.Namespace, condition: bool) -> DecomposeOptions:
    """
    Solver settings from the command line, unset flags falling back to the configured defaults.
    """
    overrides = {key: getattr(args, name) for key, name in
                 (("backend", "backend"), ("max_iters", "max_iters"), ("eps_gap", "eps_gap"),
                  ("eps_feas", "eps_feas")) if getattr(args, name, None) is not None}
    extra = {"rank_p": args.rank_p} if getattr(args, "rank_p", None) is not None else {}
    return DecomposeOptions(solver=SolverSettings(**overrides), condition=condition, **extra)


def load_reference(source: str, degree: int) -> MomentSequence:
    """
    Reference moments from a moment file, or exact moments of a measure spec (string or spec JSON file).
    """
    path = Path(source)
    if path.suffix == ".json" and path.is_file():
        try:
            if "entries" in json.loads(path.read_text(encoding="utf-8")):
                return moment_files.read_moment_file(path).truncate(degree)
        except json.JSONDecodeError as err:
            raise MomentFileError(f"{path}: invalid JSON: {err.msg}")
    return exact_moments(load_spec(source), degree)


def _emit(report, args: argparse.Namespace, title: str = "") -> None:
    if args.out:
        reports.write_report(report, args.out)
    if args.json:
        print(report.model_dump_json(indent=1))
    else:
        print(reports.render_table(report, title))


def orders_list(text: str) -> list[int]:
    try:
        return [int(d) for d in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated orders, got {text!r}")


def print_hierarchy(mu, lam, gamma: float, orders: list[int], options: DecomposeOptions, workers: int = 1) -> int:
    """
    Solves every order in ``orders`` and prints the rho_d column with the monotonicity check.
    """
    result = decomposition.solve_hierarchy(mu, lam, gamma, orders, options, max_workers=workers)
    print(f"{'d':>4}{'rho_d':>14}  status")
    for level in result.levels:
        if level.solution is not None:
            print(f"{level.d:>4}{level.solution.rho_d:>14.6f}  {level.solution.stats.status}")
        else:
            print(f"{level.d:>4}{'-':>14}  {level.error.detail}")
    print("monotone: " + ("yes" if result.monotone else f"no, violations {result.violations}"))
    return 0 if all(level.solution is not None for level in result.levels) else 1


def _monitor(args, mu, lam, options) -> int:
    orders = range(args.monitor, args.order + 1)
    result = decomposition.solve_hierarchy(mu, lam, args.gamma, orders, options, max_workers=args.workers)
    report = atoms.eigen_gap_monitor({s.d: s.v for s in result.solutions}, args.monitor, options.rank_p)
    print(f"eigenvalues of M_{report.d0}(v^d), largest first")
    for row in report.rows:
        values = " ".join(f"{e:.3e}" for e in row.eigenvalues)
        print(f"d={row.d:<3} rank {row.rank:<3} kept >= {row.smallest_kept:.3e}  dropped <= {row.largest_dropped:.3e}"
              f"  [{values}]")
    print(f"dropped group shrinking: {report.bottom_shrinking}; kept group stable: {report.top_stable}")
    return 0


def decompose(args: argparse.Namespace) -> int:
    """
    Solves the decomposition program for two moment files and prints the report; ``--hierarchy`` and ``--monitor``
    run several orders instead.

    :param args: Parsed ``decompose`` arguments.
    :type args: argparse.Namespace
    :return: Exit code.
    :rtype: int
    """
    mu = moment_files.read_moment_file(args.mu)
    lam = moment_files.read_moment_file(args.lam)
    options = decompose_options(args, args.condition)
    if args.hierarchy:
        return print_hierarchy(mu, lam, args.gamma, args.hierarchy, options, args.workers)
    if args.monitor is not None:
        return _monitor(args, mu, lam, options)

    if args.dump_program:
        problem = decomposition.DecompositionProblem(mu, lam, args.gamma, args.order)
        prog = decomposition.build_primal(problem)
        if args.condition:
            prog = orthonormal.transform_program(prog, orthonormal.orthonormal_basis(problem.lam, problem.d))
        conic.dump_program(prog, args.dump_program)

    degree = 2 * args.order
    request = reports.DecomposeRequest(
        mu=mu, lam=lam, gamma=args.gamma, order=args.order, options=options, atoms=args.atoms,
        ref_nu=load_reference(args.ref_nu, degree) if args.ref_nu else None,
        ref_psi=load_reference(args.ref_psi, degree) if args.ref_psi else None,
        circle_residual=args.circle_residual,
    )
    _, report = reports.decompose_and_report(request)
    _emit(report, args)
    return 0


def check_density_bound(args: argparse.Namespace) -> int:
    """
    Prints whether gamma M_d'(lambda) - M_d'(nu) is PSD, with its smallest eigenvalue, for every d' <= d.
    """
    nu = moment_files.read_moment_file(args.nu)
    lam = moment_files.read_moment_file(args.lam)
    for d in range(args.order + 1):
        result = density_bound_check(nu, lam, args.gamma, d)
        print(f"d={d:<3} {'holds' if result.holds else 'fails':<6} min eigenvalue {result.min_eig:.6e}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("decompose", help="solve the decomposition relaxation for two moment files")
    parser.add_argument("--mu", required=True, help="moment file of mu")
    parser.add_argument("--lambda", dest="lam", required=True, help="moment file of the reference measure")
    parser.add_argument("--gamma", type=float, required=True, help="density bound gamma > 0")
    parser.add_argument("--order", type=int, required=True, help="relaxation order d")
    parser.add_argument("--condition", action="store_true", help="solve in the lambda-orthonormal basis")
    parser.add_argument("--atoms", action="store_true", help="extract candidate atoms of the singular part")
    parser.add_argument("--ref-nu", help="reference for the absolutely continuous part (moment file or spec)")
    parser.add_argument("--ref-psi", help="reference for the singular part (moment file or spec)")
    parser.add_argument("--circle-residual", action="store_true",
                        help="report L_(v/v0)((x1^2+x2^2-1)^2) for two-dimensional data")
    parser.add_argument("--dump-program", help="write the conic program as JSON before solving")
    parser.add_argument("--hierarchy", type=orders_list, help="comma separated orders solved instead of --order")
    parser.add_argument("--monitor", type=int, metavar="D0",
                        help="track the spectrum of M_D0(v^d) for d = D0..order")
    parser.add_argument("--workers", type=int, default=1, help="orders solved concurrently")
    parser.add_argument("--out", help="write the JSON report to this file")
    parser.add_argument("--json", action="store_true", help="print the JSON report instead of the table")
    add_solver_arguments(parser)
    parser.set_defaults(handler=decompose)

    parser = subparsers.add_parser("check-density-bound", help="check gamma*M_d(lambda) - M_d(nu) >= 0 for d' <= d")
    parser.add_argument("--nu", required=True, help="moment file of nu")
    parser.add_argument("--lambda", dest="lam", required=True, help="moment file of the reference measure")
    parser.add_argument("--gamma", type=float, required=True, help="density bound gamma > 0")
    parser.add_argument("--order", type=int, required=True, help="largest order d")
    parser.set_defaults(handler=check_density_bound)
