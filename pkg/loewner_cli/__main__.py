"""Run the loewner-comb convergence harness from the command line."""

import logging
from argparse import ArgumentParser, Namespace
from sys import argv, stdout

from loewner_comb.exceptions import LoewnerCombError
from loewner_comb.graphs import SpidernetSpec, build_spidernet, omega_profile
from loewner_comb.loewner import solve_backward_f, solve_forward_g
from loewner_cli.config import build_driver, load_config, solver_settings
from loewner_cli.exceptions import HARNESS_NAME
from loewner_cli.pipelines import (
    run_field_approximation,
    run_graph_verify,
    run_slit_approximation,
)
from loewner_cli.report import emit_report

PIPELINES = {
    'approx-thm10': run_slit_approximation,
    'approx-thm11': run_field_approximation,
    'graph-verify': run_graph_verify,
}
ALIASES = {'approx-thm10': ['approx-slit'], 'approx-thm11': ['approx-field']}


def _integers(text: str) -> list[int]:
    return [int(item) for item in text.split(',') if item.strip()]


def _floats(text: str) -> list[float]:
    return [float(item) for item in text.split(',') if item.strip()]


def _complexes(text: str) -> list[complex]:
    return [complex(item.replace(' ', '')) for item in text.split(',') if item.strip()]


def build_parser() -> ArgumentParser:
    """Argument parser with one subcommand per harness action."""
    parser = ArgumentParser(
        prog=HARNESS_NAME,
        description='Loewner chain approximation by comb products of spidernets.',
    )
    parser.add_argument('--verbose', action='store_true', help='log at DEBUG level')
    commands = parser.add_subparsers(dest='command', required=True)

    for name in PIPELINES:
        command = commands.add_parser(name, aliases=ALIASES.get(name, []))
        command.set_defaults(command=name)
        command.add_argument('--config', help='JSON pipeline configuration')
        command.add_argument('--out', dest='output', help='output directory')
        command.add_argument('--moments', type=int, help='largest moment order K')
        command.add_argument(
            '--n',
            dest='resolutions',
            type=_integers,
            help='comma separated resolutions',
        )
        command.add_argument('--times', type=_floats, help='comma separated times')
        command.add_argument('--workers', type=int, help='thread count')

    solve = commands.add_parser('slit-solve', help='evaluate g_t or f_t')
    solve.add_argument('--config', help='JSON configuration holding a driver')
    solve.add_argument('--time', type=float, required=True)
    solve.add_argument(
        '--points',
        type=_complexes,
        required=True,
        help='comma separated points, e.g. 2j,1+3j',
    )
    solve.add_argument('--flow', choices=('forward', 'backward'), default='backward')

    info = commands.add_parser('spidernet-info', help='describe a truncated spidernet')
    info.add_argument('--data', type=_integers, required=True, help='a,b,c')
    info.add_argument('--depth', type=int, default=3)
    info.add_argument('--dump', help='write the adjacency list to this file')

    return parser


def run_pipeline(arguments: Namespace, logger: logging.Logger) -> int:
    """Run a pipeline, write its report and return the exit status."""
    overrides = {
        key: getattr(arguments, key)
        for key in ('output', 'moments', 'resolutions', 'times', 'workers')
    }
    config = load_config(arguments.config, overrides)
    report = PIPELINES[arguments.command](config, logger)
    emit_report(report, config['output'], logger)
    for name, passed in sorted(report.checks.items()):
        logger.info(f'check {name}: {"pass" if passed else "FAIL"}')
    return 0 if report.passed else 1


def run_slit_solve(arguments: Namespace, logger: logging.Logger) -> int:
    """Print z and the value of g_t(z) or f_t(z) per line."""
    config = load_config(arguments.config)
    driver = build_driver(config.get('driver', {'type': 'constant', 'value': 0.0}))
    solve = solve_forward_g if arguments.flow == 'forward' else solve_backward_f
    for point in arguments.points:
        value = solve(driver, arguments.time, point, solver_settings(config), logger)
        stdout.write(f'{point!r} {value!r}\n')
    return 0


def run_spidernet_info(arguments: Namespace, logger: logging.Logger) -> int:
    """Print shell sizes and one omega profile per shell."""
    spec = SpidernetSpec(*arguments.data, arguments.depth)
    graph = build_spidernet(spec)
    start = 0
    for depth, size in enumerate(spec.shell_sizes()):
        profile = omega_profile(graph, start)
        stdout.write(f'shell {depth}: {size} vertices, omega {profile}\n')
        start += size
    if arguments.dump:
        with open(arguments.dump, 'w', encoding='utf-8', newline='\n') as file:
            file.write(graph.dump())
        logger.info(f'Wrote adjacency list to {arguments.dump}')
    return 0


def main(arguments: list[str]) -> int:
    """Parse command line arguments and invoke the appropriate action."""
    arguments = build_parser().parse_args(arguments[1:])
    logging.basicConfig(
        level=logging.DEBUG if arguments.verbose else logging.INFO,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    logger = logging.getLogger(HARNESS_NAME)

    try:
        if arguments.command in PIPELINES:
            return run_pipeline(arguments, logger)
        if arguments.command == 'slit-solve':
            return run_slit_solve(arguments, logger)
        return run_spidernet_info(arguments, logger)
    except LoewnerCombError as exception:
        logger.exception(exception)
        return 2


if __name__ == '__main__':
    raise SystemExit(main(argv))
