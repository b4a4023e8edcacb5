"""Command line surface: one subcommand per experiment kind."""

import argparse
import logging
import sys

from core.config import REPORT_FORMATS
from core.errors import EXIT_OK, ConfigError, PruneBoundError
from core.experiment import require_passed, resolve_config, run_experiment
from .report import write_report

logger = logging.getLogger(__name__)

COMMANDS = {
    'table2': 'spectral norm quantiles of xavier-uniform matrices',
    'table3': 'Latala moment terms and the constant C',
    'order-stats': 'order-statistic moments against Monte Carlo',
    'balls-bins': 'maximum bin load, exact and sampled',
    'circulant-equiv': 'wrap-around convolution against its dense map',
    'fcn-sweep': 'pruning gap of fully connected networks over width',
    'cnn-sweep': 'filter-pruning gap of convolutional networks over width',
    'bounds': 'width requirements and success probabilities',
    'oracle-suite': 'all quick oracle checks',
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument('--config', help='JSON config file')
    common.add_argument('--seed', type=int, help='base seed')
    common.add_argument('--trials', type=int, help='trial count')
    common.add_argument('--out', help='report path (stdout when omitted)')
    common.add_argument('--format', choices=REPORT_FORMATS, help='report format')
    common.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    parser = _Parser(prog='prunebound', description='Verify pruning guarantees numerically.')
    sub = parser.add_subparsers(dest='kind', required=True)
    for kind, text in COMMANDS.items():
        sub.add_parser(kind, parents=[common], help=text)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        print(f"prunebound: {e}", file=sys.stderr)
        return e.exit_code
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        config = resolve_config(args.kind, args.config, args.seed, args.trials, args.out, args.format)
        report = run_experiment(config)
        write_report(config, report)
        require_passed(config, report)
    except PruneBoundError as e:
        logger.error("%s", e)
        return e.exit_code
    return EXIT_OK
