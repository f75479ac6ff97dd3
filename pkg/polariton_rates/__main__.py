#!/usr/bin/env python3

import logging
import sys
from typing import Optional, Sequence

from numpy.linalg import LinAlgError

from .args import Args, parse_args
from .config import load_config
from .errors import ConfigError, ConvergenceError
from .run_config import RunConfig
from .runner import diagnostics, run

EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def main(argv: Optional[Sequence[str]] = None) -> None:
    if sys.version_info < (3, 8):
        print("Error: Python 3.8 or above required", file=sys.stderr)
        sys.exit(1)
    logging.basicConfig(format="%(levelname)s:%(message)s", level=logging.WARNING)
    args = parse_args(argv)
    sys.exit(_dispatch(args))


def _dispatch(args: Args) -> int:
    try:
        config = _load(args.config)
        if args.command == "validate":
            for line in diagnostics(config):
                print(line)
        else:
            run(config, output_dir=args.output_dir, threads=args.threads)
    except ConfigError as exc:
        print(f"ERROR:{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, LinAlgError, ValueError) as exc:
        print(f"ERROR:{args.config}:numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


def _load(filename: str) -> RunConfig:
    with open(filename, encoding="utf-8") as source:
        return load_config(source, filename)


if __name__ == "__main__":
    main()
