import argparse
import logging

from src.routes.decompose import add_solver_arguments, decompose_options, orders_list, print_hierarchy
from src.services import examples, reports

logger = logging.getLogger(__name__)


def _weights(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated weights, got {text!r}")


def reproduce(args: argparse.Namespace) -> int:
    """
    Runs a reference example for every weight in ``--p`` and prints one table per weight.

    :param args: Parsed ``reproduce`` arguments.
    :type args: argparse.Namespace
    :return: Exit code.
    :rtype: int
    """
    examples.get_example(args.example)
    options = decompose_options(args, condition=args.condition)
    if args.hierarchy:
        code = 0
        for p in args.p:
            request = examples.build_request(args.example, p, max(args.hierarchy), args.nu_kind, options)
            print(f"{args.example}  p={p:g}  gamma={request.gamma:g}")
            code = max(code, print_hierarchy(request.mu, request.lam, request.gamma, args.hierarchy, options))
        return code
    collected = []
    for p in args.p:
        report = examples.reproduce(args.example, p, args.order, args.nu_kind, options,
                                    atoms=True if args.atoms else None)
        collected.append(report)
        if args.json:
            print(report.model_dump_json(indent=1))
        else:
            print(reports.render_table(report, f"{args.example}  p={p:g}"))
            print()
    if args.out:
        for p, report in zip(args.p, collected):
            target = args.out if len(collected) == 1 else args.out.replace(".json", f"_p{p:g}.json")
            reports.write_report(report, target)
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("reproduce", help="run one of the reference examples ex1..ex5")
    parser.add_argument("--example", required=True, help="ex1, ex2, ex3, ex4 or ex5")
    parser.add_argument("--p", type=_weights, required=True, help="weight of the absolutely continuous part, "
                                                                 "comma separated for several rows")
    parser.add_argument("--order", type=int, help="relaxation order (9 for ex1-ex4, 7 for ex5 by default)")
    parser.add_argument("--nu-kind", choices=["gaussian", "box"], default="gaussian",
                        help="absolutely continuous part of ex5")
    parser.add_argument("--atoms", action="store_true", help="extract candidate atoms")
    parser.add_argument("--hierarchy", type=orders_list, help="comma separated orders, prints the rho_d column only")
    parser.add_argument("--condition", action="store_true", help="solve in the lambda-orthonormal basis")
    parser.add_argument("--out", help="write the JSON report(s) to this file")
    parser.add_argument("--json", action="store_true", help="print JSON reports instead of tables")
    add_solver_arguments(parser)
    parser.set_defaults(handler=reproduce)
