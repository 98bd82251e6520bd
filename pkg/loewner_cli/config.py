"""Pipeline configuration: loading, validation and builders.

A configuration is a JSON document. Keys missing from the document take the
values in DEFAULT_CONFIG; command line flags override both.

"""

import json
from copy import deepcopy
from hashlib import sha256
from pathlib import Path
from typing import Any, TypedDict

from loewner_comb.discretize import BIN_ANCHORS, max_feasible_bound
from loewner_comb.exceptions import InfeasibleResolution, LoewnerCombValueError
from loewner_comb.halfplane import DiscreteMeasure
from loewner_comb.loewner import (
    ConstantDriver,
    DrivingFunction,
    FormulaDriver,
    HerglotzField,
    PiecewiseConstantDriver,
    SampledDriver,
    SolverSettings,
)
from loewner_cli.exceptions import InvalidConfigError

GRAPH_MAX_RESOLUTION = 2
GRAPH_MAX_MOMENTS = 6


class Tolerances(TypedDict, total=False):
    """Numerical tolerances of a pipeline run."""

    solver: float
    contour_points: int
    mean: float
    variance: float
    nonnegative: float
    graph: float


class PipelineConfig(TypedDict, total=False):
    """Settings for one harness run; see DEFAULT_CONFIG for the defaults."""

    driver: dict[str, Any]
    field: dict[str, Any]
    horizon: float
    bound: float | None
    resolutions: list[int]
    times: list[float]
    moments: int
    tolerances: Tolerances
    refinement_ratio: int
    bin_anchor: str
    assert_monotone: bool
    monotone_max_order: int | None
    workers: int
    output: str


DEFAULT_CONFIG: PipelineConfig = {
    'horizon': 1.0,
    'bound': None,
    'resolutions': [8, 16, 32],
    'times': [0.25, 0.5, 1.0],
    'moments': 6,
    'tolerances': {
        'solver': 1e-10,
        'contour_points': 1024,
        'mean': 1e-10,
        'variance': 1e-10,
        'nonnegative': 1e-9,
        'graph': 1e-6,
    },
    'refinement_ratio': 4,
    'bin_anchor': 'barycenter',
    'assert_monotone': False,
    'monotone_max_order': None,
    'workers': 1,
    'output': 'output',
}


def load_config(
    path: str | Path | None, overrides: dict | None = None
) -> PipelineConfig:
    """Read a JSON configuration, fill in defaults and apply overrides."""
    config = deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            document = json.loads(Path(path).read_text(encoding='utf-8'))
        except (OSError, json.JSONDecodeError) as error:
            raise InvalidConfigError(f'Cannot read config {path}: {error}') from error
        if not isinstance(document, dict):
            raise InvalidConfigError(f'Config {path} must hold a JSON object.')
        tolerances = {**config['tolerances'], **document.pop('tolerances', {})}
        config.update(document)
        config['tolerances'] = tolerances

    for key, value in (overrides or {}).items():
        if value is not None:
            config[key] = value
    return config


def _require(condition: bool, key: str, message: str):
    if not condition:
        raise InvalidConfigError(f'Invalid "{key}": {message}')


def validate_config(config: PipelineConfig, pipeline: str):
    """Check a configuration for the 'slit', 'field' or 'graph' pipeline."""
    unknown = set(config) - set(PipelineConfig.__annotations__)
    _require(not unknown, ', '.join(sorted(unknown)), 'unknown configuration key')

    horizon = config['horizon']
    _require(
        isinstance(horizon, (int, float)) and horizon > 0, 'horizon', 'must be > 0'
    )

    resolutions = config['resolutions']
    _require(
        len(resolutions) > 0
        and all(isinstance(n, int) and n >= 1 for n in resolutions)
        and all(left < right for left, right in zip(resolutions, resolutions[1:])),
        'resolutions',
        'must be an increasing list of positive integers',
    )
    _require(
        len(config['times']) > 0
        and all(0 <= time <= horizon for time in config['times']),
        'times',
        f'must be a non-empty list inside [0, {horizon}]',
    )
    _require(
        isinstance(config['moments'], int) and config['moments'] >= 2,
        'moments',
        'must be an integer >= 2',
    )
    _require(config['workers'] >= 1, 'workers', 'must be >= 1')
    _require(config['refinement_ratio'] >= 1, 'refinement_ratio', 'must be >= 1')
    _require(
        config['bin_anchor'] in BIN_ANCHORS,
        'bin_anchor',
        f'must be one of {BIN_ANCHORS}',
    )
    _require(
        config['tolerances']['contour_points'] >= 256,
        'tolerances',
        'contour_points must be >= 256',
    )

    if pipeline == 'field':
        _require('field' in config, 'field', 'required by the field pipeline')
        build_field(config['field'], horizon)
    else:
        _require('driver' in config, 'driver', f'required by the {pipeline} pipeline')
        build_driver(config['driver'])

    if pipeline == 'graph':
        _require(
            max(resolutions) <= GRAPH_MAX_RESOLUTION,
            'resolutions',
            f'graph verification runs only up to n = {GRAPH_MAX_RESOLUTION}',
        )
        _require(
            config['moments'] <= GRAPH_MAX_MOMENTS,
            'moments',
            f'graph verification runs only up to order {GRAPH_MAX_MOMENTS}',
        )


def check_feasibility(bound: float, horizon: float, resolutions: list[int]):
    """Raise InfeasibleResolution unless every n accommodates the bound M."""
    for resolution in resolutions:
        if bound > max_feasible_bound(horizon, resolution):
            raise InfeasibleResolution(
                f'Driver bound M={bound} is infeasible at n={resolution} '
                f'(limit {max_feasible_bound(horizon, resolution):.6g}).'
            )


def build_driver(spec: dict[str, Any]) -> DrivingFunction:
    """Build a DrivingFunction from its configuration entry."""
    kind = spec.get('type')
    try:
        if kind == 'constant':
            return ConstantDriver(float(spec['value']))
        if kind == 'piecewise_constant':
            return PiecewiseConstantDriver(
                tuple(spec['breakpoints']), tuple(spec['values'])
            )
        if kind == 'sampled':
            return SampledDriver(float(spec['horizon']), tuple(spec['values']))
        if kind == 'formula':
            return FormulaDriver(spec['id'], dict(spec.get('params', {})))
    except KeyError as error:
        raise InvalidConfigError(f'Invalid "driver": missing {error}') from error
    except LoewnerCombValueError as error:
        raise InvalidConfigError(f'Invalid "driver": {error.message}') from error

    raise InvalidConfigError(f'Invalid "driver": unknown type "{kind}"')


def build_field(spec: dict[str, Any], horizon: float) -> HerglotzField:
    """Build a HerglotzField from its configuration entry."""
    try:
        field = HerglotzField(
            tuple(spec['breakpoints']),
            tuple(
                DiscreteMeasure(tuple(entry['positions']), tuple(entry['weights']))
                for entry in spec['measures']
            ),
            float(spec['bound']),
        )
    except KeyError as error:
        raise InvalidConfigError(f'Invalid "field": missing {error}') from error
    except LoewnerCombValueError as error:
        raise InvalidConfigError(f'Invalid "field": {error.message}') from error

    _require(
        field.horizon == horizon,
        'field',
        f'breakpoints must end at the horizon {horizon}',
    )
    return field


def solver_settings(config: PipelineConfig) -> SolverSettings:
    """Reference solver settings from the tolerances."""
    tolerance = config['tolerances']['solver']
    return SolverSettings(atol=tolerance, rtol=tolerance)


def config_hash(config: PipelineConfig) -> str:
    """sha256 of the canonical JSON form of the configuration."""
    return sha256(json.dumps(config, sort_keys=True).encode('utf-8')).hexdigest()
