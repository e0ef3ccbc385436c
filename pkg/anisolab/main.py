"""
anisolab - Main Entry Point

Config-driven numerical laboratory for the anisotropic p-Laplacian:
    anisolab <command> --config <file> --out <dir> [--strict] [--refine k]

Exit status 0 when every requested check holds, 1 on solver failure or a
violated check (report still written), 2 on an invalid configuration.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from anisolab import __version__
from anisolab.config import settings
from anisolab.exceptions import ConfigError
from anisolab.middleware.validation import experiment_validator
from anisolab.models.schemas import Command
from anisolab.routers import experiments, suite  # noqa: F401 (registers handlers)

logger = logging.getLogger(__name__)


def configure_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper(), logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anisolab",
        description="Numerical laboratory for Pohozaev identities, torsion and eigenvalue bounds of anisotropic p-Laplacians.",
    )
    parser.add_argument("command", choices=[c.value for c in Command], help="Experiment to run")
    parser.add_argument("--config", type=Path, help="Experiment file (JSON); defaults are used when omitted")
    parser.add_argument("--out", type=Path, default=Path("out"), help="Output directory (default: out)")
    parser.add_argument("--strict", action="store_true", help="Zero tolerance in every inequality check")
    parser.add_argument("--refine", type=int, default=None, help="Halve target_h k times")
    parser.add_argument("--log-level", default=None, help="Override ANISOLAB_LOG_LEVEL")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    command = Command(args.command)

    try:
        if args.refine is not None and args.refine < 0:
            raise ConfigError(f"--refine must be >= 0, got {args.refine}")
        if args.config is not None:
            config = experiment_validator.load(args.config, command, args.strict, args.refine)
        else:
            config = experiment_validator.parse({}, command, args.strict, args.refine)
        return experiments.run(config, args.out)
    except ConfigError as e:
        logger.error(e.detail)
        print(f"anisolab: configuration error: {e.detail}", file=sys.stderr)
        return e.exit_status


if __name__ == "__main__":
    sys.exit(main())
