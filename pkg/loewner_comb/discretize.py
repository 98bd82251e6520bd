"""Discretisation of Loewner data.

Continuous data are reduced, step by step, to the piecewise constant slit
drivers that the comb product pipeline consumes:

1. `bin_field` replaces a Herglotz field with support in [0, M] by a
   multi-slit with m bins.
2. `mollify_weights` turns measurable slit weights into continuous ones.
3. `singleize_multislit` turns a multi-slit into a single piecewise
   constant driver with the same occupation times on each of m cells.
4. `ladder_params` samples a non-negative driver at resolution n and rounds
   it to the integer horizontal degrees u_{n,k} of the spidernets
   S_{n^2, u}.

"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from logging import Logger, getLogger
from typing import NamedTuple

import numpy as np
from scipy.ndimage import uniform_filter1d

from loewner_comb.exceptions import (
    InfeasibleResolution,
    LoewnerCombValueError,
    NegativeDriver,
)
from loewner_comb.halfplane import HalfPlaneMap, SlitMap, compose_all
from loewner_comb.loewner import (
    ConstantDriver,
    DrivingFunction,
    HerglotzField,
    PiecewiseConstantDriver,
    VectorField,
    scale_map,
)

WEIGHT_SUM_TOLERANCE = 1e-12
BIN_ANCHORS = ('midpoint', 'barycenter')


def _check_rows(rows: np.ndarray):
    """Weights are non-negative and sum to one at every time."""
    if np.any(rows < 0):
        raise LoewnerCombValueError('Slit weights must be non-negative.')
    sums = rows.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > WEIGHT_SUM_TOLERANCE):
        raise LoewnerCombValueError(
            f'Slit weights must sum to 1, found sums in '
            f'[{sums.min()}, {sums.max()}].'
        )


@dataclass(frozen=True, eq=False)
class SampledWeights:
    """Weights lambda_1 ... lambda_N sampled on a uniform grid over [0, horizon].

    samples has one row per grid time and one column per slit; values in
    between are interpolated linearly.

    """

    horizon: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[0] < 2:
            raise LoewnerCombValueError(
                'Sampled weights need a (times, slits) array with two or more rows.'
            )
        _check_rows(samples)
        samples.flags.writeable = False
        object.__setattr__(self, 'samples', samples)

    @property
    def count(self) -> int:
        return self.samples.shape[1]

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.samples.shape[0])

    def values(self, time: float) -> np.ndarray:
        return np.array(
            [np.interp(time, self.grid, column) for column in self.samples.T]
        )

    def on_piece(self, start: float, stop: float) -> Callable[[float], np.ndarray]:
        return self.values

    def knots(self, time: float) -> tuple[float, ...]:
        return tuple(float(point) for point in self.grid[1:-1] if point < time)


@dataclass(frozen=True)
class StepWeights:
    """Weights constant on the cells (breakpoints[j], breakpoints[j + 1]]."""

    breakpoints: tuple[float, ...]
    table: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        table = tuple(tuple(float(value) for value in row) for row in self.table)
        if len(table) == 0 or len(table) != len(self.breakpoints) - 1:
            raise LoewnerCombValueError(
                'Step weights need one row per cell between breakpoints.'
            )
        if len({len(row) for row in table}) != 1:
            raise LoewnerCombValueError('Every row of step weights needs N entries.')
        _check_rows(np.asarray(table))
        object.__setattr__(self, 'table', table)
        object.__setattr__(
            self, 'breakpoints', tuple(float(point) for point in self.breakpoints)
        )

    @property
    def count(self) -> int:
        return len(self.table[0])

    @property
    def horizon(self) -> float:
        return self.breakpoints[-1]

    def values(self, time: float) -> np.ndarray:
        index = np.searchsorted(self.breakpoints, time, side='left') - 1
        return np.asarray(self.table[int(np.clip(index, 0, len(self.table) - 1))])

    def on_piece(self, start: float, stop: float) -> Callable[[float], np.ndarray]:
        row = self.values(0.5 * (start + stop))
        return lambda s: row

    def knots(self, time: float) -> tuple[float, ...]:
        return tuple(point for point in self.breakpoints[1:] if point < time)

    def sample(self, points: int) -> SampledWeights:
        """Sample on a uniform grid of `points` times over [0, horizon]."""
        grid = np.linspace(0.0, self.horizon, points)
        return SampledWeights(self.horizon, np.array([self.values(t) for t in grid]))


@dataclass(frozen=True)
class MultiSlit:
    """N slits fed with weights lambda_k(t) at driver positions V_k(t).

    A multi-slit is itself Loewner data: its Herglotz field is
    sum_k lambda_k(t) / (w - V_k(t)).

    """

    weights: StepWeights | SampledWeights
    drivers: tuple[DrivingFunction, ...]

    def __post_init__(self):
        drivers = tuple(self.drivers)
        if len(drivers) != self.weights.count:
            raise LoewnerCombValueError(
                f'{self.weights.count} slit weights but {len(drivers)} drivers.'
            )
        object.__setattr__(self, 'drivers', drivers)

    @property
    def count(self) -> int:
        return len(self.drivers)

    def knots(self, time: float) -> tuple[float, ...]:
        knots = set(self.weights.knots(time))
        for driver in self.drivers:
            knots.update(driver.knots(time))
        return tuple(sorted(knots))

    def vector_field(self, start: float, stop: float) -> VectorField:
        weights = self.weights.on_piece(start, stop)
        drivers = [driver.on_piece(start, stop) for driver in self.drivers]

        def multi_slit_field(s: float, w: np.ndarray) -> np.ndarray:
            return sum(
                weight / (w - driver(s))
                for weight, driver in zip(weights(s), drivers)
            )

        return multi_slit_field

    def bound(self, time: float) -> float:
        return max(driver.bound(time) for driver in self.drivers)

    def instantaneous_moments(self, time: float) -> tuple[float, float]:
        weights = self.weights.values(time)
        positions = np.array([driver.value(time) for driver in self.drivers])
        return (
            float(np.dot(weights, positions)),
            float(np.dot(weights, positions**2)),
        )


def bin_field(
    field: HerglotzField, bins: int, anchor: str = 'midpoint'
) -> MultiSlit:
    """Replace a field supported in [0, M] by a multi-slit with `bins` slits.

    The bins are I_1 = [0, M/m] and I_k = ((k - 1) M / m, k M / m], and
    lambda_k(t) = nu_t(I_k). With anchor 'midpoint' slit k sits at the
    midpoint of I_k; with 'barycenter' it sits at the nu_t-weighted mean of
    the atoms in I_k (the midpoint while the bin is empty).

    """
    if bins < 1:
        raise LoewnerCombValueError(f'Bin count must be positive: {bins}')
    if anchor not in BIN_ANCHORS:
        raise LoewnerCombValueError(
            f'Unknown bin anchor "{anchor}"; expected one of {BIN_ANCHORS}.'
        )

    bound = field.bound_value
    width = bound / bins
    edges = width * np.arange(1, bins)
    lowers = [0.0, *edges.tolist()]
    uppers = [*edges.tolist(), bound]
    midpoints = width * (np.arange(bins) + 0.5)

    table = []
    anchors = []
    for measure in field.measures:
        positions = np.asarray(measure.positions)
        if positions.min() < 0:
            raise LoewnerCombValueError(
                f'Binning needs a field supported in [0, {bound}]: {positions}'
            )
        weights = np.array(
            [
                measure.mass(lower, upper, closed_lower=k == 0)
                for k, (lower, upper) in enumerate(zip(lowers, uppers))
            ]
        )
        index = np.searchsorted(edges, positions, side='left')
        moments = np.bincount(
            index, weights=positions * np.asarray(measure.weights), minlength=bins
        )
        occupied = weights > 0
        table.append(tuple(weights))
        anchors.append(
            np.where(occupied, moments / np.where(occupied, weights, 1.0), midpoints)
        )

    if anchor == 'midpoint':
        drivers = tuple(ConstantDriver(float(point)) for point in midpoints)
    else:
        drivers = tuple(
            PiecewiseConstantDriver(
                field.breakpoints, tuple(float(row[k]) for row in anchors)
            )
            for k in range(bins)
        )
    return MultiSlit(StepWeights(field.breakpoints, tuple(table)), drivers)


def mollify_weights(weights: SampledWeights, window: float) -> SampledWeights:
    """Smooth each weight with a box kernel of the given width.

    The kernel reflects at both ends of [0, horizon]; afterwards every row is
    renormalised to sum to one.

    """
    if window <= 0:
        raise LoewnerCombValueError(f'Mollifier window must be positive: {window}')

    spacing = weights.horizon / (weights.samples.shape[0] - 1)
    size = 2 * int(round(window / (2 * spacing))) + 1
    smoothed = uniform_filter1d(weights.samples, size=size, axis=0, mode='reflect')
    smoothed = np.clip(smoothed, 0.0, None)
    smoothed /= smoothed.sum(axis=1, keepdims=True)
    return SampledWeights(weights.horizon, smoothed)


def singleize_multislit(
    multi_slit: MultiSlit, horizon: float, cells: int
) -> PiecewiseConstantDriver:
    """Replace a multi-slit by one slit with the same occupation times.

    [0, T] is cut into m cells of length T/m. With t_j the right end of
    cell j, the cell is split into consecutive pieces of length
    lambda_k(t_j) T / m in slit order; on piece k the driver takes the value
    of V_k at the middle of the piece. Slits of zero weight get no piece.

    """
    if cells < 1:
        raise LoewnerCombValueError(f'Cell count must be positive: {cells}')

    width = horizon / cells
    breakpoints = [0.0]
    values = []
    for cell in range(cells):
        start = cell * width
        stop = horizon if cell == cells - 1 else (cell + 1) * width
        weights = multi_slit.weights.values(stop)
        fractions = np.cumsum(weights)
        occupied = [k for k in range(multi_slit.count) if weights[k] > 0]
        piece_start = start
        for k in occupied:
            piece_stop = stop if k == occupied[-1] else start + fractions[k] * width
            if piece_stop <= piece_start:
                continue
            breakpoints.append(piece_stop)
            values.append(
                float(multi_slit.drivers[k].value(0.5 * (piece_start + piece_stop)))
            )
            piece_start = piece_stop

    return PiecewiseConstantDriver(tuple(breakpoints), tuple(values))


def discretize_field(
    field: HerglotzField, cells: int, anchor: str = 'barycenter'
) -> PiecewiseConstantDriver:
    """Bin a field into `cells` slits and singleize on `cells` time cells."""
    return singleize_multislit(bin_field(field, cells, anchor), field.horizon, cells)


def max_feasible_bound(horizon: float, resolution: int) -> float:
    """Largest driver bound M allowed at resolution n: sqrt(T/2)(2 sqrt(n) - n^-1.5)."""
    return np.sqrt(horizon / 2) * (2 * np.sqrt(resolution) - resolution**-1.5)


def smallest_feasible_resolution(
    bound: float, horizon: float, limit: int = 1 << 20
) -> int:
    """The least n whose feasible bound covers M."""
    resolution = 1
    while max_feasible_bound(horizon, resolution) < bound:
        resolution += 1
        if resolution > limit:
            raise InfeasibleResolution(
                f'No resolution up to {limit} accommodates M={bound}, T={horizon}.'
            )
    return resolution


class LadderParams(NamedTuple):
    """Integer horizontal degrees u_{n,k} for the spidernets S_{n^2, u}."""

    horizon: float
    resolution: int
    bound: float
    levels: tuple[int, ...]

    @property
    def scale(self) -> float:
        """c = sqrt(2 n^3 / T)."""
        return np.sqrt(2 * self.resolution**3 / self.horizon)

    @property
    def family_parameter(self) -> int:
        """The n^2 of the spidernet data (2n^2, n^2 + 1 + u, n^2)."""
        return self.resolution**2

    def steps_before(self, time: float) -> int:
        """k = floor(t n / T), the number of factors in use at time t."""
        steps = int(np.floor(time * self.resolution / self.horizon + 1e-12))
        return min(self.resolution, steps)

    def driver(self) -> PiecewiseConstantDriver:
        """The rescaled driver u_{n,k} / c on ((k - 1) T / n, k T / n]."""
        return PiecewiseConstantDriver(
            tuple(
                self.horizon * k / self.resolution for k in range(self.resolution + 1)
            ),
            tuple(level / self.scale for level in self.levels),
        )


def ladder_params(
    driver: DrivingFunction,
    horizon: float,
    resolution: int,
    bound: float = None,
    logger: Logger = None,
) -> LadderParams:
    """Sample a non-negative driver at resolution n.

    u_{n,k} = floor(sqrt(2 n^3 / T) U(k T / n)) for k = 1 ... n.

    Args:
        driver: the driving function U, non-negative on [0, T].
        horizon: T.
        resolution: n.
        bound: M; defaults to the driver's own bound on [0, T].
        logger: receives the levels at DEBUG.

    Raises:
        InfeasibleResolution: if M > sqrt(T/2)(2 sqrt(n) - n^-1.5), so some
            u_{n,k} could exceed 2 n^2 - 1.
        NegativeDriver: if a sampled value of U is negative.

    """
    if logger is None:
        logger = getLogger('loewner-comb')
    if horizon <= 0 or resolution < 1:
        raise LoewnerCombValueError(
            f'Need T > 0 and n >= 1, got T={horizon}, n={resolution}.'
        )
    if bound is None:
        bound = driver.bound(horizon)

    if bound > max_feasible_bound(horizon, resolution):
        raise InfeasibleResolution(
            f'Driver bound M={bound} exceeds '
            f'{max_feasible_bound(horizon, resolution):.6g} at n={resolution}, '
            f'T={horizon}.'
        )

    times = horizon * np.arange(1, resolution + 1) / resolution
    samples = np.asarray(driver.value(times), dtype=float)
    if np.any(samples < 0):
        raise NegativeDriver(
            f'Driver is negative at t={times[np.argmax(samples < 0)]:.6g}.'
        )

    scale = np.sqrt(2 * resolution**3 / horizon)
    levels = tuple(int(level) for level in np.floor(scale * samples))
    if max(levels) > 2 * resolution**2 - 1:
        raise InfeasibleResolution(
            f'Level {max(levels)} exceeds {2 * resolution**2 - 1}; '
            f'the driver exceeds the bound M={bound}.'
        )

    logger.debug(f'Ladder levels at n={resolution}: {levels}')
    return LadderParams(float(horizon), resolution, float(bound), levels)


def ladder_maps(params: LadderParams, steps: int) -> list[SlitMap]:
    """SlitMap(u_{n,i}, 4 n^2) for i = 1 ... steps."""
    return [
        SlitMap(float(level), 4.0 * params.family_parameter)
        for level in params.levels[:steps]
    ]


def approximant_map(params: LadderParams, steps: int) -> HalfPlaneMap:
    """Rescaled composition of the first `steps` ladder maps.

    This is the F-transform of mu_{n,k}(c .) with c = sqrt(2 n^3 / T), which
    approximates mu_t at t = k T / n.

    """
    return scale_map(
        compose_all(ladder_maps(params, steps)), params.scale, params.scale**2
    )
