import argparse
import json
import logging
import sys

from pydantic import ValidationError

from src.conf.config import settings
from src.exceptions import MomentError
from src.routes import decompose, moments, reproduce


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lebesgue-moments",
                                     description="Lebesgue decomposition of a measure from its moments")
    parser.add_argument("--log-level", default=settings.log_level, help="DEBUG, INFO, WARNING or ERROR")
    subparsers = parser.add_subparsers(dest="command", required=True)
    moments.register(subparsers)
    decompose.register(subparsers)
    reproduce.register(subparsers)
    return parser


def main(argv=None) -> int:
    """
    Command line entry point. Library errors end the process with their exit code and a JSON description on
    stderr; schema violations exit with code 2.

    :param argv: Arguments without the program name, ``sys.argv[1:]`` by default.
    :type argv: list[str] | None
    :return: Exit code.
    :rtype: int
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr, force=True,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except MomentError as err:
        logging.error(err.detail)
        print(json.dumps(err.to_dict()), file=sys.stderr)
        return err.exit_code
    except ValidationError as err:
        detail = "; ".join(f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in err.errors())
        print(json.dumps({"error": "ValidationError", "detail": detail, "exit_code": 2}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
