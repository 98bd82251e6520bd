"""Chordal Loewner flows.

The Loewner data supported here all describe a Herglotz vector field

    H(t, w) = int nu_t(du) / (w - u)

that is smooth in w and piecewise smooth in t:

* a `DrivingFunction` U gives nu_t = delta_{U(t)} (the slit equation);
* a `HerglotzField` gives one `DiscreteMeasure` per time cell;
* `loewner_comb.discretize.MultiSlit` gives sum_k lambda_k(t) delta_{V_k(t)}.

g_t solves dg/dt = H(t, g) with g_0(z) = z, and f_t = g_t^{-1} is obtained by
integrating the same equation backwards in time from t to 0. The time
interval is split at the knots of the data so no step straddles a
discontinuity in t.

"""

from abc import ABC, abstractmethod
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from logging import Logger, getLogger
from typing import NamedTuple, Protocol

import numpy as np
from scipy.integrate import RK45, quad

from loewner_comb.exceptions import (
    HullAbsorbed,
    LoewnerCombValueError,
    NormalizationViolated,
    StepLimitExceeded,
)
from loewner_comb.halfplane import (
    DEFAULT_QUADRATURE_POINTS,
    DiscreteMeasure,
    HalfPlaneMap,
    MomentSequence,
    ScaledMap,
    adaptive_contour_moments,
    eval_map,
)

VectorField = Callable[[float, np.ndarray], np.ndarray]

MEAN_TOLERANCE = 1e-7
VARIANCE_TOLERANCE = 1e-6


class SolverSettings(NamedTuple):
    """Tolerances and limits for the Loewner flows.

    `fixed_steps` switches from the adaptive Dormand-Prince 5(4) stepper to
    classical fourth order Runge-Kutta with that many equal steps per smooth
    piece of the data.

    """

    atol: float = 1e-10
    rtol: float = 1e-10
    max_steps: int = 100_000
    eps_min: float = 1e-8
    fixed_steps: int | None = None


def validate_settings(settings: SolverSettings):
    """Raise LoewnerCombValueError for non-positive tolerances or limits."""
    if settings.atol <= 0 or settings.rtol <= 0:
        raise LoewnerCombValueError(f'Solver tolerances must be positive: {settings}')
    if settings.eps_min <= 0:
        raise LoewnerCombValueError(f'Hull guard must be positive: {settings}')
    if settings.max_steps < 1:
        raise LoewnerCombValueError(f'Step limit must be positive: {settings}')
    if settings.fixed_steps is not None and settings.fixed_steps < 1:
        raise LoewnerCombValueError(f'Fixed step count must be positive: {settings}')


class LoewnerData(Protocol):
    """What the flows need from a driver, a field or a multi-slit."""

    def knots(self, time: float) -> tuple[float, ...]:
        """Times in (0, time) where the data may be discontinuous or kinked."""

    def vector_field(self, start: float, stop: float) -> VectorField:
        """H(s, w) for s in the closed piece [start, stop]."""

    def bound(self, time: float) -> float:
        """Bound on the support of nu_s for s in [0, time]."""

    def instantaneous_moments(self, time: float) -> tuple[float, float]:
        """Mean and second moment of nu_time."""


def _as_times(time) -> np.ndarray:
    return np.asarray(time, dtype=float)


def _cell_index(breakpoints: np.ndarray, time) -> np.ndarray:
    """Cell j holds (b_j, b_{j+1}]; the first cell is closed at b_0."""
    index = np.searchsorted(breakpoints, _as_times(time), side='left') - 1
    return np.clip(index, 0, len(breakpoints) - 2)


def _validate_breakpoints(breakpoints: Sequence[float], cells: int) -> tuple:
    """Check that breakpoints start at 0, increase, and bound `cells` cells."""
    breakpoints = tuple(float(value) for value in breakpoints)
    if len(breakpoints) != cells + 1:
        raise LoewnerCombValueError(
            f'Expected {cells + 1} breakpoints for {cells} cells, '
            f'got {len(breakpoints)}.'
        )
    if breakpoints[0] != 0.0:
        raise LoewnerCombValueError(f'Breakpoints must start at 0: {breakpoints}')
    if any(left >= right for left, right in zip(breakpoints, breakpoints[1:])):
        raise LoewnerCombValueError(f'Breakpoints must increase: {breakpoints}')
    return breakpoints


class DrivingFunction(ABC):
    """A real driving function U for the slit equation dg/dt = 1 / (g - U(t))."""

    @abstractmethod
    def value(self, time):
        """U at a time or an array of times."""

    @abstractmethod
    def bound(self, time: float) -> float:
        """Bound on |U| over [0, time]."""

    def knots(self, time: float) -> tuple[float, ...]:
        return ()

    def on_piece(self, start: float, stop: float) -> Callable[[float], float]:
        """U restricted to a smooth piece [start, stop]."""
        return self.value

    def vector_field(self, start: float, stop: float) -> VectorField:
        driver = self.on_piece(start, stop)

        def slit_field(s: float, w: np.ndarray) -> np.ndarray:
            return 1.0 / (w - driver(s))

        return slit_field

    def instantaneous_moments(self, time: float) -> tuple[float, float]:
        level = float(self.value(time))
        return level, level**2

    def __call__(self, time):
        return self.value(time)


@dataclass(frozen=True)
class ConstantDriver(DrivingFunction):
    """U(t) = level."""

    level: float

    def value(self, time):
        times = _as_times(time)
        values = np.full(times.shape, float(self.level))
        return float(values) if times.ndim == 0 else values

    def bound(self, time: float) -> float:
        return abs(self.level)


@dataclass(frozen=True)
class PiecewiseConstantDriver(DrivingFunction):
    """U equals values[j] on (breakpoints[j], breakpoints[j + 1]].

    The first cell is closed at 0 and the last value continues past the final
    breakpoint.

    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(value) for value in self.values)
        if len(values) == 0:
            raise LoewnerCombValueError('A piecewise constant driver needs values.')
        object.__setattr__(self, 'values', values)
        object.__setattr__(
            self, 'breakpoints', _validate_breakpoints(self.breakpoints, len(values))
        )

    def value(self, time):
        index = _cell_index(np.asarray(self.breakpoints), time)
        values = np.asarray(self.values)[index]
        return float(values) if np.ndim(values) == 0 else values

    def bound(self, time: float) -> float:
        last = int(_cell_index(np.asarray(self.breakpoints), time))
        return max(abs(value) for value in self.values[: last + 1])

    def knots(self, time: float) -> tuple[float, ...]:
        return tuple(point for point in self.breakpoints[1:] if point < time)

    def on_piece(self, start: float, stop: float) -> Callable[[float], float]:
        level = self.value(0.5 * (start + stop))
        return lambda s: level


@dataclass(frozen=True)
class SampledDriver(DrivingFunction):
    """U sampled on a uniform grid over [0, horizon], linearly interpolated."""

    horizon: float
    values: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(value) for value in self.values)
        if len(values) < 2:
            raise LoewnerCombValueError('A sampled driver needs at least two samples.')
        if self.horizon <= 0:
            raise LoewnerCombValueError(f'Horizon must be positive: {self.horizon}')
        object.__setattr__(self, 'values', values)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, len(self.values))

    def value(self, time):
        values = np.interp(_as_times(time), self.grid, self.values)
        return float(values) if np.ndim(values) == 0 else values

    def bound(self, time: float) -> float:
        return float(np.max(np.abs(self.values)))

    def knots(self, time: float) -> tuple[float, ...]:
        return tuple(float(point) for point in self.grid[1:-1] if point < time)


class FormulaSpec(NamedTuple):
    """A closed-form driver family."""

    parameters: tuple[str, ...]
    function: Callable[[np.ndarray, Mapping[str, float]], np.ndarray]
    bound: Callable[[float, Mapping[str, float]], float]


FORMULAS = {
    'linear': FormulaSpec(
        ('intercept', 'slope'),
        lambda t, p: p['intercept'] + p['slope'] * t,
        lambda t, p: max(abs(p['intercept']), abs(p['intercept'] + p['slope'] * t)),
    ),
    'cosine_shift': FormulaSpec(
        ('shift', 'amplitude', 'frequency'),
        lambda t, p: p['shift'] + p['amplitude'] * np.cos(p['frequency'] * t),
        lambda t, p: abs(p['shift']) + abs(p['amplitude']),
    ),
    'sqrt_ramp': FormulaSpec(
        ('scale',),
        lambda t, p: p['scale'] * np.sqrt(t),
        lambda t, p: abs(p['scale']) * np.sqrt(t),
    ),
}


@dataclass(frozen=True)
class FormulaDriver(DrivingFunction):
    """A driver from the FORMULAS table, e.g. linear intercept + slope * t."""

    formula_id: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.formula_id not in FORMULAS:
            raise LoewnerCombValueError(
                f'Unknown driver formula "{self.formula_id}"; '
                f'expected one of {sorted(FORMULAS)}.'
            )
        missing = set(FORMULAS[self.formula_id].parameters) - set(self.params)
        if missing:
            raise LoewnerCombValueError(
                f'Formula "{self.formula_id}" is missing parameters {sorted(missing)}.'
            )

    def value(self, time):
        values = FORMULAS[self.formula_id].function(_as_times(time), self.params)
        return float(values) if np.ndim(values) == 0 else values

    def bound(self, time: float) -> float:
        return float(FORMULAS[self.formula_id].bound(time, self.params))


@dataclass(frozen=True)
class HerglotzField:
    """A Herglotz vector field, piecewise constant in time.

    measures[j] is nu_t for t in (breakpoints[j], breakpoints[j + 1]], the
    first cell closed at 0 and the last measure continuing past the final
    breakpoint. Every atom lies in [-bound, bound].

    """

    breakpoints: tuple[float, ...]
    measures: tuple[DiscreteMeasure, ...]
    bound_value: float

    def __post_init__(self):
        measures = tuple(self.measures)
        if len(measures) == 0:
            raise LoewnerCombValueError('A Herglotz field needs at least one measure.')
        if self.bound_value <= 0:
            raise LoewnerCombValueError(
                f'Field bound must be positive: {self.bound_value}'
            )
        for measure in measures:
            if measure.support_bound > self.bound_value:
                raise LoewnerCombValueError(
                    f'Atoms {measure.positions} leave [-{self.bound_value}, '
                    f'{self.bound_value}].'
                )
        object.__setattr__(self, 'measures', measures)
        object.__setattr__(
            self, 'breakpoints', _validate_breakpoints(self.breakpoints, len(measures))
        )

    @classmethod
    def constant(cls, measure: DiscreteMeasure, horizon: float, bound: float):
        """The field nu_t = measure for all t."""
        return cls((0.0, horizon), (measure,), bound)

    @property
    def horizon(self) -> float:
        return self.breakpoints[-1]

    def measure_at(self, time: float) -> DiscreteMeasure:
        return self.measures[int(_cell_index(np.asarray(self.breakpoints), time))]

    def knots(self, time: float) -> tuple[float, ...]:
        return tuple(point for point in self.breakpoints[1:] if point < time)

    def vector_field(self, start: float, stop: float) -> VectorField:
        measure = self.measure_at(0.5 * (start + stop))

        def herglotz_field(s: float, w: np.ndarray) -> np.ndarray:
            return measure.cauchy_transform(w)

        return herglotz_field

    def bound(self, time: float) -> float:
        return self.bound_value

    def instantaneous_moments(self, time: float) -> tuple[float, float]:
        measure = self.measure_at(time)
        return measure.mean, measure.second_moment


def _pieces(data: LoewnerData, time: float) -> list[tuple[float, float]]:
    """Smooth pieces of [0, time] in increasing order."""
    cuts = [0.0, *sorted(knot for knot in data.knots(time) if 0 < knot < time), time]
    return list(zip(cuts, cuts[1:]))


def _check_guard(values: np.ndarray, time: float, settings: SolverSettings):
    """Raise HullAbsorbed when a trajectory gets within eps_min of the axis."""
    if np.min(values.imag) < settings.eps_min:
        raise HullAbsorbed(
            f'Trajectory reached Im w = {np.min(values.imag):.3g} at t = {time:.6g}; '
            'the starting point lies in the hull.'
        )


def _rk4_piece(
    vector_field: VectorField,
    start: float,
    stop: float,
    values: np.ndarray,
    settings: SolverSettings,
    guard: bool,
) -> tuple[np.ndarray, int]:
    """Classical Runge-Kutta with settings.fixed_steps equal steps."""
    step = (stop - start) / settings.fixed_steps
    for index in range(settings.fixed_steps):
        time = start + index * step
        k1 = vector_field(time, values)
        k2 = vector_field(time + step / 2, values + step / 2 * k1)
        k3 = vector_field(time + step / 2, values + step / 2 * k2)
        k4 = vector_field(time + step, values + step * k3)
        values = values + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if guard:
            _check_guard(values, time + step, settings)
    return values, settings.fixed_steps


def _adaptive_piece(
    vector_field: VectorField,
    start: float,
    stop: float,
    values: np.ndarray,
    settings: SolverSettings,
    guard: bool,
    budget: int,
) -> tuple[np.ndarray, int]:
    """Dormand-Prince 5(4) with step control from start to stop (either direction)."""
    stepper = RK45(
        vector_field, start, values, stop, rtol=settings.rtol, atol=settings.atol
    )
    steps = 0
    while stepper.status == 'running':
        if steps >= budget:
            raise StepLimitExceeded(
                f'Loewner flow needed more than {settings.max_steps} steps.'
            )
        message = stepper.step()
        steps += 1
        if stepper.status == 'failed':
            # The forward field is singular only where w meets the support.
            if guard:
                raise HullAbsorbed(
                    f'Forward flow stalled at t = {stepper.t:.6g} with '
                    f'Im w = {np.min(stepper.y.imag):.3g}: {message}'
                )
            raise StepLimitExceeded(f'Loewner flow step failed: {message}')
        if guard:
            _check_guard(stepper.y, stepper.t, settings)
    return stepper.y, steps


def _integrate(
    data: LoewnerData,
    time: float,
    points: np.ndarray,
    settings: SolverSettings,
    backward: bool,
) -> tuple[np.ndarray, int]:
    """Run the flow over [0, time] forwards (g_t) or backwards (f_t)."""
    pieces = _pieces(data, time)
    if backward:
        pieces = [(stop, start) for start, stop in reversed(pieces)]

    values = points.ravel().astype(complex)
    total_steps = 0
    for start, stop in pieces:
        vector_field = data.vector_field(min(start, stop), max(start, stop))
        if settings.fixed_steps is not None:
            values, steps = _rk4_piece(
                vector_field, start, stop, values, settings, not backward
            )
        else:
            values, steps = _adaptive_piece(
                vector_field,
                start,
                stop,
                values,
                settings,
                not backward,
                settings.max_steps - total_steps,
            )
        total_steps += steps

    return values.reshape(points.shape), total_steps


def _prepare(time: float, z, settings: SolverSettings) -> np.ndarray:
    validate_settings(settings)
    if time < 0:
        raise LoewnerCombValueError(f'Loewner time must be non-negative: {time}')
    points = np.asarray(z, dtype=complex)
    if np.any(points.imag <= 0):
        raise LoewnerCombValueError('Loewner flows start in the upper half-plane.')
    return points


def solve_forward_g(
    data: LoewnerData,
    time: float,
    z,
    settings: SolverSettings = SolverSettings(),
    logger: Logger = None,
):
    """Return g_t(z) by integrating dw/ds = H(s, w) from w(0) = z.

    Args:
        data: a driving function, Herglotz field or multi-slit.
        time: the time t >= 0.
        z: a point or array of points with positive imaginary part.
        settings: tolerances, step limit and hull guard.
        logger: receives the step count at DEBUG.

    Raises:
        HullAbsorbed: when Im w drops below settings.eps_min before t, i.e.
            z lies in the hull K_t.
        StepLimitExceeded: when more than settings.max_steps steps are needed.

    """
    if logger is None:
        logger = getLogger('loewner-comb')

    points = _prepare(time, z, settings)
    if time == 0:
        values, steps = points.copy(), 0
    else:
        values, steps = _integrate(data, time, points, settings, backward=False)

    logger.debug(f'Forward flow to t={time} took {steps} steps.')
    return complex(values) if values.ndim == 0 else values


def solve_backward_f(
    data: LoewnerData,
    time: float,
    z,
    settings: SolverSettings = SolverSettings(),
    logger: Logger = None,
):
    """Return f_t(z) = g_t^{-1}(z).

    The equation dw/ds = H(s, w) is integrated from w(t) = z down to s = 0.
    Along this reversed flow Im w increases, so no hull guard is needed.

    """
    if logger is None:
        logger = getLogger('loewner-comb')

    points = _prepare(time, z, settings)
    if time == 0:
        values, steps = points.copy(), 0
    else:
        values, steps = _integrate(data, time, points, settings, backward=True)

    logger.debug(f'Backward flow from t={time} took {steps} steps.')
    return complex(values) if values.ndim == 0 else values


@dataclass(frozen=True, eq=False)
class NumericalFlow(HalfPlaneMap):
    """f_t of a Loewner chain, i.e. the F-transform of its measure mu_t."""

    data: LoewnerData
    time: float
    settings: SolverSettings = SolverSettings()

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=complex)
        if self.time == 0:
            return points
        values, _ = _integrate(self.data, self.time, points, self.settings, True)
        return values

    def support_bound(self) -> float:
        # Heuristic; callers validate contour radii built from it.
        return self.data.bound(self.time) + 4 * np.sqrt(self.time)


def scale_map(
    half_plane_map: HalfPlaneMap, factor: float, time_factor: float
) -> ScaledMap:
    """Return z -> F(c z) / c, the F-transform of B -> mu(c B).

    If F is the F-transform of mu_{d t} with d = c^2, the result is the
    F-transform of mu_t.

    """
    if factor <= 0 or time_factor <= 0:
        raise LoewnerCombValueError(
            f'Scaling factors must be positive: c={factor}, d={time_factor}'
        )
    if not np.isclose(time_factor, factor**2, rtol=1e-12, atol=0):
        raise LoewnerCombValueError(
            f'Time scaling d={time_factor} does not match c^2 = {factor**2}.'
        )
    return ScaledMap(half_plane_map, factor)


def hydro_residual(half_plane_map: HalfPlaneMap, variance: float, radius: float):
    """Return |F(iR) - (iR - t / (iR))| for the hydrodynamic normalisation."""
    if radius < 10 * half_plane_map.support_bound() or radius <= 0:
        raise LoewnerCombValueError(
            f'Radius {radius} must be at least ten times the support bound '
            f'{half_plane_map.support_bound()}.'
        )
    point = 1j * radius
    return float(abs(eval_map(half_plane_map, point) - (point - variance / point)))


def moment_functionals(data: LoewnerData, time: float) -> MomentSequence:
    """Exact low order moments (m_0 ... m_4) of the chain measure mu_t.

    m_1 = 0, m_2 = t, m_3 = int_0^t mean(nu_s) ds and
    m_4 = int_0^t second_moment(nu_s) ds + 3 t^2 / 2.

    """
    first = 0.0
    second = 0.0
    for start, stop in _pieces(data, time):
        if stop <= start:
            continue
        first += quad(lambda s: data.instantaneous_moments(s)[0], start, stop)[0]
        second += quad(lambda s: data.instantaneous_moments(s)[1], start, stop)[0]
    return MomentSequence((1.0, 0.0, float(time), first, second + 1.5 * time**2))


def measure_moments_at_time(
    data: LoewnerData,
    time: float,
    order: int,
    settings: SolverSettings = SolverSettings(),
    points: int = DEFAULT_QUADRATURE_POINTS,
    logger: Logger = None,
) -> MomentSequence:
    """Moments m_0 ... m_K of the chain measure mu_t.

    f_t is evaluated by the backward flow on a contour whose radius starts
    at bound + 4 sqrt(t) + 1 and grows until the moments are stable.

    Raises:
        NormalizationViolated: if the result does not have mean 0 and
            variance t, which points at a solver or branch fault.

    """
    if logger is None:
        logger = getLogger('loewner-comb')
    if time < 0:
        raise LoewnerCombValueError(f'Loewner time must be non-negative: {time}')
    if time == 0:
        return MomentSequence((1.0,) + (0.0,) * order)

    flow = NumericalFlow(data, time, settings)
    moments, radius = adaptive_contour_moments(
        flow, flow.support_bound() + 1, order, points
    )
    logger.debug(f'Moments at t={time} used contour radius {radius:.4g}.')

    if order >= 1 and abs(moments[1]) >= MEAN_TOLERANCE:
        raise NormalizationViolated(f'Mean {moments[1]} at t={time} is not 0.')
    if order >= 2 and abs(moments[2] - time) >= VARIANCE_TOLERANCE:
        raise NormalizationViolated(f'Variance {moments[2]} at t={time} is not {time}.')
    return moments
