"""Convergence pipelines.

Each pipeline turns a configuration into a `ConvergenceReport`:

* `run_slit_approximation` rescaled compositions of spidernet F-transforms
  against the moments of the slit Loewner chain of a driver U;
* `run_field_approximation` the same for a Herglotz field, discretised to a
  slit driver at every resolution;
* `run_graph_verify` exact walk counts on comb product balls against the
  composed F-transforms, plus the monotone independence checks.

"""

from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from logging import Logger, getLogger

import numpy as np

from loewner_comb.discretize import (
    LadderParams,
    approximant_map,
    discretize_field,
    ladder_maps,
    ladder_params,
)
from loewner_comb.exceptions import LoewnerCombError
from loewner_comb.graphs import SpidernetSpec, comb_ball
from loewner_comb.halfplane import (
    MomentSequence,
    adaptive_contour_moments,
    compose_all,
)
from loewner_comb.loewner import LoewnerData, measure_moments_at_time
from loewner_comb.walks import (
    adjacency_vs_sum,
    check_monotone_factorization,
    root_moments,
)
from loewner_cli.config import (
    PipelineConfig,
    build_driver,
    build_field,
    check_feasibility,
    solver_settings,
    validate_config,
)
from loewner_cli.exceptions import ReferenceFailure
from loewner_cli.report import ConvergenceReport

STRUCTURE_CHECK_DEPTH = 2


def _parallel_map(function: Callable, items: Iterable, workers: int) -> list:
    """Map in order, on a thread pool when more than one worker is configured."""
    if workers == 1:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(function, items))


def reference_moments(
    data: LoewnerData, config: PipelineConfig, logger: Logger
) -> dict[float, MomentSequence]:
    """Moments of the continuous chain at every configured time."""

    def at_time(time: float) -> MomentSequence:
        try:
            return measure_moments_at_time(
                data,
                time,
                config['moments'],
                solver_settings(config),
                config['tolerances']['contour_points'],
                logger,
            )
        except LoewnerCombError as exception:
            logger.exception(exception)
            raise ReferenceFailure(
                f'Reference moments at t={time} failed: {exception}'
            ) from exception

    times = config['times']
    return dict(zip(times, _parallel_map(at_time, times, config['workers'])))


def approximant_moments(
    params: LadderParams, time: float, order: int, points: int
) -> tuple[int, MomentSequence]:
    """k = floor(t n / T) and the moments of the rescaled k-fold composition."""
    steps = params.steps_before(time)
    grid_time = steps * params.horizon / params.resolution
    moments, _ = adaptive_contour_moments(
        approximant_map(params, steps),
        params.bound + 4 * np.sqrt(grid_time) + 1,
        order,
        points,
    )
    return steps, moments


def _tabulate(
    report: ConvergenceReport,
    ladders: list[LadderParams],
    references: dict[float, MomentSequence],
    logger: Logger,
):
    """Fill in approximant rows for every resolution and time."""
    config = report.config
    cells = [(params, time) for params in ladders for time in config['times']]

    def moments_of(cell):
        params, time = cell
        return approximant_moments(
            params, time, config['moments'], config['tolerances']['contour_points']
        )

    results = _parallel_map(moments_of, cells, config['workers'])
    for (params, time), (steps, moments) in zip(cells, results):
        report.add_moments(params.resolution, steps, time, moments, references[time])

    for params in ladders:
        logger.info(
            f'n={params.resolution}: max error '
            f'{max(r.abs_error for r in report.rows if r.n == params.resolution):.3e}'
        )


def _approximation_checks(report: ConvergenceReport):
    """Mean, variance, sign and (optionally) monotone error checks."""
    config = report.config
    tolerances = config['tolerances']
    horizon = config['horizon']

    report.checks['mean'] = all(
        abs(row.approx) < tolerances['mean'] for row in report.rows if row.order == 1
    )
    report.checks['variance'] = all(
        abs(row.approx - row.k * horizon / row.n) < tolerances['variance']
        for row in report.rows
        if row.order == 2
    )
    report.checks['nonnegative'] = all(
        row.approx >= -tolerances['nonnegative'] for row in report.rows
    )

    if config['assert_monotone']:
        errors = report.max_errors(config['monotone_max_order'])
        report.checks['monotone'] = all(
            all(
                by_n[left] > by_n[right]
                for left, right in zip(sorted(by_n), sorted(by_n)[1:])
            )
            for by_n in errors.values()
        )


def run_slit_approximation(
    config: PipelineConfig, logger: Logger = None
) -> ConvergenceReport:
    """Spidernet approximants of the slit chain driven by config['driver'].

    For every resolution n the driver is sampled to the levels u_{n,k}; at
    each time t the composition of the first k = floor(t n / T) maps
    SlitMap(u_{n,i}, 4 n^2), rescaled by c = sqrt(2 n^3 / T), is compared
    with the moments of mu_t.

    """
    if logger is None:
        logger = getLogger('loewner-comb')

    validate_config(config, 'slit')
    driver = build_driver(config['driver'])
    horizon = config['horizon']
    bound = config['bound'] if config['bound'] is not None else driver.bound(horizon)
    check_feasibility(bound, horizon, config['resolutions'])

    report = ConvergenceReport('approx-slit', config)
    references = reference_moments(driver, config, logger)
    ladders = [
        ladder_params(driver, horizon, n, bound, logger) for n in config['resolutions']
    ]
    _tabulate(report, ladders, references, logger)
    _approximation_checks(report)
    return report


def refinement_cells(resolution: int, ratio: int) -> int:
    """m(n) = max(1, n // ratio) time cells and bins at resolution n."""
    return max(1, resolution // ratio)


def run_field_approximation(
    config: PipelineConfig, logger: Logger = None
) -> ConvergenceReport:
    """Spidernet approximants of the chain of the Herglotz field config['field'].

    At resolution n the field is binned into m(n) slits, singleized on m(n)
    time cells and then treated like a slit driver.

    """
    if logger is None:
        logger = getLogger('loewner-comb')

    validate_config(config, 'field')
    horizon = config['horizon']
    field = build_field(config['field'], horizon)
    check_feasibility(field.bound_value, horizon, config['resolutions'])

    report = ConvergenceReport('approx-field', config)
    references = reference_moments(field, config, logger)

    ladders = []
    for resolution in config['resolutions']:
        cells = refinement_cells(resolution, config['refinement_ratio'])
        driver = discretize_field(field, cells, config['bin_anchor'])
        logger.debug(f'n={resolution}: {cells} refinement cells.')
        ladders.append(
            ladder_params(driver, horizon, resolution, field.bound_value, logger)
        )

    _tabulate(report, ladders, references, logger)
    _approximation_checks(report)
    return report


def _word(params: LadderParams, steps: int, depth: int) -> list[SpidernetSpec]:
    """S_{n^2, u_{n,1}} ... S_{n^2, u_{n,steps}} truncated at `depth`."""
    return [
        SpidernetSpec.meixner(params.family_parameter, level, depth)
        for level in params.levels[:steps]
    ]


def run_graph_verify(
    config: PipelineConfig, logger: Logger = None
) -> ConvergenceReport:
    """Compare walk counts on comb product balls with the composed F-transforms.

    For every resolution n and k = 1 ... n, the root moments of the ball of
    radius floor(K/2) in S_{n^2, u_{n,1}} |> ... |> S_{n^2, u_{n,k}} are
    computed exactly and compared with the contour moments of the unscaled
    composition. Words of length two or more also get the monotone
    factorisation and adjacency decomposition checks.

    A count agrees when it is within `tolerances.graph` of the contour value,
    scaled by max(1, |value|).

    """
    if logger is None:
        logger = getLogger('loewner-comb')

    validate_config(config, 'graph')
    driver = build_driver(config['driver'])
    horizon = config['horizon']
    order = config['moments']
    bound = config['bound'] if config['bound'] is not None else driver.bound(horizon)
    check_feasibility(bound, horizon, config['resolutions'])
    tolerance = config['tolerances']['graph']
    points = config['tolerances']['contour_points']

    report = ConvergenceReport('graph-verify', config)
    agreement, factorization, decomposition = [], [], []
    for resolution in config['resolutions']:
        params = ladder_params(driver, horizon, resolution, bound, logger)
        for steps in range(1, resolution + 1):
            word = _word(params, steps, order // 2)
            graph_moments = root_moments(comb_ball(word, order // 2), order)
            composed = compose_all(ladder_maps(params, steps))
            analytic, _ = adaptive_contour_moments(
                composed, composed.support_bound() + 1, order, points
            )
            report.add_moments(
                resolution,
                steps,
                steps * horizon / resolution,
                graph_moments,
                analytic,
            )
            agreement.extend(
                abs(count - value) <= tolerance * max(1.0, abs(value))
                for count, value in zip(graph_moments, analytic)
            )
            logger.info(f'Verified word {word} up to order {order}.')

        if resolution >= 2:
            word = _word(params, 2, STRUCTURE_CHECK_DEPTH)
            factorization.extend(
                check_monotone_factorization(word, p, q, r)
                for p in range(order + 1)
                for q in range(order + 1 - p)
                for r in range(order + 1 - p - q)
            )
            decomposition.append(adjacency_vs_sum(word))

    report.checks['graph_vs_analytic'] = all(agreement)
    report.checks['nonnegative'] = all(row.approx >= 0 for row in report.rows)
    if factorization:
        report.checks['factorization'] = all(factorization)
        report.checks['adjacency_sum'] = all(decomposition)
    return report
