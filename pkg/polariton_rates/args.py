from argparse import ArgumentParser
from dataclasses import dataclass
from typing import Optional, Sequence

from . import __version__


@dataclass
class Args:
    command: str
    config: str
    output_dir: Optional[str] = None
    threads: int = 1


def parse_args(argv: Optional[Sequence[str]] = None) -> Args:
    parser = ArgumentParser(
        prog="polariton-rates",
        description="Compute relaxation rates of molecular polaritons.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    run = commands.add_parser("run", help="evaluate the configured tasks")
    run.add_argument("config", metavar="CONFIG", help="TOML run configuration")
    run.add_argument(
        "-o",
        "--output-dir",
        dest="output_dir",
        help="write artifacts here instead of [output] directory",
    )
    run.add_argument(
        "-j",
        "--threads",
        dest="threads",
        type=int,
        default=1,
        help="evaluate sweep points in parallel",
    )

    validate = commands.add_parser(
        "validate", help="check a configuration without computing"
    )
    validate.add_argument("config", metavar="CONFIG", help="TOML run configuration")

    args = parser.parse_args(argv)
    threads = getattr(args, "threads", 1)
    if threads < 1:
        parser.error(f"--threads must be at least 1, got {threads}")
    return Args(
        args.command,
        args.config,
        output_dir=getattr(args, "output_dir", None),
        threads=threads,
    )
