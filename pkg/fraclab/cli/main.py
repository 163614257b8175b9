"""Command line entry point.

    fraclab catalog
    fraclab run [scenario] [--config PATH] [--out DIR] [--seed N] [--set key=value ...]

Exit codes: 0 all checks passed, 2 invalid configuration or parameters,
3 solver failure, 4 invariant violation or failed check.
"""
import argparse
import logging
import sys

import pandas as pd

from ..exceptions import ConfigError, ParameterError, SolverError, InvariantViolation
from ..models.catalog import catalog
from .config import RunConfig, SCENARIOS
from .runner import Runner

logger = logging.getLogger(__name__)

EXIT_CODES = ((ParameterError, 2, 'config'), (SolverError, 3, 'solver'), (InvariantViolation, 4, 'invariant'))


def build_parser():
    parser = argparse.ArgumentParser(prog='fraclab', description='Singular fractional diffusion solver and checks')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='More log output (repeatable)')
    parser.add_argument('-q', '--quiet', action='store_true', help='Only log errors')
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help='Run a scenario')
    run.add_argument('scenario', nargs='?', choices=SCENARIOS, help='Scenario to run')
    run.add_argument('--scenario', dest='scenario_flag', choices=SCENARIOS, help='Scenario to run')
    run.add_argument('--config', help='JSON configuration file or a manifest.json of a previous run')
    run.add_argument('--out', help='Output directory')
    run.add_argument('--seed', type=int, help='Seed of the randomized checks')
    run.add_argument('--set',
                     dest='overrides',
                     action='append',
                     default=[],
                     metavar='KEY=VALUE',
                     help='Override one config key (repeatable)')
    run.add_argument('--no-progress', action='store_true', help='Hide progress bars')

    commands.add_parser('catalog', help='List the built-in sources and nonlinearities')
    return parser


def resolve_config(args):
    """Builds the run configuration: file, then --set overrides, then the dedicated flags"""
    config = RunConfig.from_file(args.config) if args.config else RunConfig.defaults()
    for assignment in args.overrides:
        config.override(assignment)
    scenario = args.scenario_flag or args.scenario
    if args.scenario_flag and args.scenario and args.scenario_flag != args.scenario:
        raise ConfigError('Conflicting scenarios {!r} and {!r}'.format(args.scenario, args.scenario_flag))
    if scenario:
        config['scenario'] = scenario
    if args.out:
        config['output'] = args.out
    if args.seed is not None:
        config['seed'] = args.seed
    if args.no_progress:
        config['progress'] = False
    return config.validate()


def _configure_logging(args):
    level = logging.ERROR if args.quiet else (logging.DEBUG if args.verbose > 1 else
                                              logging.INFO if args.verbose else logging.WARNING)
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')
    logging.captureWarnings(True)


def main(argv=None):
    args = build_parser().parse_args(argv)
    _configure_logging(args)

    try:
        if args.command == 'catalog':
            with pd.option_context('display.max_colwidth', None, 'display.width', 200):
                print(catalog().to_string(index=False))
            return 0
        config = resolve_config(args)
        code = Runner(config).run()
        if code != 0:
            print('fraclab: error[check]: in-run checks failed, see {}/summary.txt'.format(config['output']),
                  file=sys.stderr)
        return code
    except tuple(cls for cls, _, _ in EXIT_CODES) as err:
        code, category = next((code, category) for cls, code, category in EXIT_CODES if isinstance(err, cls))
        reason = ' '.join(str(err).split())
        print('fraclab: error[{}]: {}'.format(category, reason), file=sys.stderr)
        return code


if __name__ == '__main__':
    sys.exit(main())
