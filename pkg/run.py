"""
Command line entry point: python run.py <subcommand> [options]
"""

import logging
import sys

from common.arguments import build_parser
from common.config import get_cfg
from common.pipeline import run_command

logger = logging.getLogger(__name__)

DOMAIN_ERRORS = (ValueError, KeyError, OSError, RuntimeError, FloatingPointError)


def create_logger(verbose=False):
    head = '%(asctime)-15s %(levelname)s %(name)s: %(message)s'
    logging.basicConfig(stream=sys.stderr, format=head, force=True,
                        level=logging.DEBUG if verbose else logging.INFO)
    # third-party debug output drowns the per-step losses
    for name in ('matplotlib', 'PIL', 'numba'):
        logging.getLogger(name).setLevel(logging.WARNING)
    return logging.getLogger()


def load_config(args):
    try:
        return get_cfg(args.config, args.opts)
    except AssertionError as e:
        # yacs reports unknown keys and type clashes as assertions
        raise ValueError(f'Illegal config override: {e}') from e


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    create_logger(args.verbose)
    try:
        cfg = load_config(args)
        run_command(args, cfg)
    except DOMAIN_ERRORS as e:
        logger.error(f'{args.command} failed: {type(e).__name__}: {e}')
        logger.debug('traceback', exc_info=True)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
