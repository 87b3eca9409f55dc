import argparse
import logging
import sys

from src.moments.measures import exact_moments
from src.services import moment_files
from src.services.spec_parser import load_spec

logger = logging.getLogger(__name__)


def gen_moments(args: argparse.Namespace) -> int:
    """
    Writes the exact moments of a measure spec up to ``--degree`` as a canonical moment file.

    :param args: Parsed ``gen-moments`` arguments (spec, degree, out, label).
    :type args: argparse.Namespace
    :return: Exit code.
    :rtype: int
    """
    spec = load_spec(args.spec)
    z = exact_moments(spec, args.degree)
    if args.label:
        z = z.relabel(args.label)
    if args.out:
        moment_files.write_moment_file(z, args.out)
    else:
        sys.stdout.write(moment_files.dumps(z))
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen-moments", help="write the moments of a measure spec to a moment file")
    parser.add_argument("--spec", required=True, help="measure spec string (e.g. uniform:0.1:0.7) or JSON file")
    parser.add_argument("--degree", type=int, required=True, help="maximal total degree D")
    parser.add_argument("--out", help="output file, stdout when omitted")
    parser.add_argument("--label", default="", help="label stored in the file")
    parser.set_defaults(handler=gen_moments)
