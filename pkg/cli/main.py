import argparse
import logging
import os
import sys
from pathlib import Path

from cli.commands import run
from cli.manifest import describe
from data.constants import LOG_LEVEL_ENV, ExitCode
from utils.errors import KagomeError

logger = logging.getLogger(__name__)


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(prog='python -m cli', description='Kagome cavity cell experiments')
    parser.add_argument('--log-level', default=None, help=f'Logging level (default: ${LOG_LEVEL_ENV} or INFO).')
    commands = parser.add_subparsers(dest='command', required=True)

    run_parser = commands.add_parser('run', help='Run the experiment a manifest describes.')
    run_parser.add_argument('--manifest', type=Path, required=True, help='YAML experiment manifest.')
    run_parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                            help='Override a manifest field by dotted path; repeatable.')
    run_parser.add_argument('--jobs', type=int, default=1, help='Worker cap for independent realizations.')
    run_parser.add_argument('--out', type=Path, default=None, help='Run directory for the artifacts.')
    run_parser.add_argument('--seed', type=int, default=None, help='Replace the manifest seed.')
    run_parser.add_argument('--plot', action='store_true', help='Also render SVG figures.')

    describe_parser = commands.add_parser('describe', help='Print the manifest schema of an experiment kind.')
    describe_parser.add_argument('kind', help='Experiment kind, e.g. ed-spectrum.')
    return parser.parse_args(argv)


def configure_logging(level: str | None) -> None:
    level = (level or os.getenv(LOG_LEVEL_ENV) or 'INFO').upper()
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def main(argv: list[str] | None = None) -> int:
    """Entry point; returns the process exit status."""
    args = parse_args(argv)
    configure_logging(args.log_level)
    if args.command == 'describe':
        try:
            print(describe(args.kind))
        except KagomeError as error:
            logger.error(str(error))
            return error.exit_code.value
        return ExitCode.SUCCESS.value
    if args.seed is not None and args.seed < 0:
        logger.error(f'--seed must be a non-negative integer, got {args.seed}')
        return ExitCode.VALIDATION_ERROR.value
    return run(args.manifest, args.overrides, jobs=args.jobs, out=args.out, seed=args.seed, plot=args.plot)


if __name__ == '__main__':
    sys.exit(main())
