"""Half-plane analytic maps.

This module contains the F-transforms F_mu = 1 / G_mu of probability measures
on the real line, seen as self-maps of the upper half-plane H. The maps can be
composed (monotone convolution), and moments, densities and atoms of the
underlying measure can be read back from them.

All maps are evaluated on numpy arrays so that a whole quadrature contour is
pushed through a composition in one go. Scalar input gives a Python complex
back.

"""

from abc import ABC, abstractmethod
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from math import comb
from typing import NamedTuple

import numpy as np
from scipy.linalg import hankel

from loewner_comb.exceptions import (
    BranchCutError,
    ContourError,
    LoewnerCombValueError,
)

# Quadrature defaults for contour moments.
DEFAULT_QUADRATURE_POINTS = 1024
MINIMUM_QUADRATURE_POINTS = 256
NORMALIZATION_TOLERANCE = 1e-6
STABILITY_TOLERANCE = 1e-8
RADIUS_GROWTH = 1.5

# Stieltjes inversion and atom detection.
DENSITY_TOLERANCE = 1e-6
MINIMUM_DENSITY_EPSILON = 1e-12
ATOM_EPSILONS = tuple(10.0**-power for power in range(2, 11))
ATOM_THRESHOLD = 1e-9

WEIGHT_SUM_TOLERANCE = 1e-12
HANKEL_TOLERANCE = 1e-8


def upper_side(points: np.ndarray) -> np.ndarray:
    """Put real points on the upper side of the real axis.

    numpy keeps the sign of a zero imaginary part, and the principal square
    root of a negative real with a -0.0 imaginary part lands on the negative
    imaginary axis. Real points are rewritten with a +0.0 imaginary part.

    """
    return np.where(points.imag == 0, points.real + 0j, points)


def _scalar_or_array(points: np.ndarray, values: np.ndarray) -> complex | np.ndarray:
    """Return a Python complex for 0-d input, otherwise the array."""
    if points.ndim == 0:
        return complex(values)
    return values


@dataclass(frozen=True)
class DiscreteMeasure:
    """A finitely supported probability measure.

    Positions are strictly increasing and every weight is positive. Weights
    must sum to one within 1e-12.

    """

    positions: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        """Coerce to float tuples and validate the atoms."""
        positions = tuple(float(position) for position in self.positions)
        weights = tuple(float(weight) for weight in self.weights)
        object.__setattr__(self, 'positions', positions)
        object.__setattr__(self, 'weights', weights)

        if len(positions) == 0 or len(positions) != len(weights):
            raise LoewnerCombValueError(
                'A discrete measure needs matching, non-empty positions and weights.'
            )
        if any(weight <= 0 for weight in weights):
            raise LoewnerCombValueError(f'Atom weights must be positive: {weights}')
        if abs(sum(weights) - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise LoewnerCombValueError(f'Atom weights sum to {sum(weights)}, not 1.')
        if any(left >= right for left, right in zip(positions, positions[1:])):
            raise LoewnerCombValueError(
                f'Atom positions must be strictly increasing: {positions}'
            )

    @classmethod
    def dirac(cls, position: float) -> 'DiscreteMeasure':
        """Point mass at `position`."""
        return cls((position,), (1.0,))

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[float, float]]) -> 'DiscreteMeasure':
        """Build a measure from (position, weight) pairs in any order.

        Pairs at the same position are merged and zero weights are dropped.

        """
        merged: dict[float, float] = {}
        for position, weight in atoms:
            if weight < 0:
                raise LoewnerCombValueError(f'Negative atom weight: {weight}')
            if weight > 0:
                merged[float(position)] = merged.get(float(position), 0.0) + weight
        ordered = sorted(merged.items())
        return cls(
            tuple(position for position, _ in ordered),
            tuple(weight for _, weight in ordered),
        )

    def cauchy_transform(self, z: np.ndarray) -> np.ndarray:
        """Return G(z) = sum_i w_i / (z - a_i) for an array of points."""
        points = np.asarray(z, dtype=complex)
        terms = np.asarray(self.weights) / (
            points[..., np.newaxis] - np.asarray(self.positions)
        )
        return terms.sum(axis=-1)

    def mass(self, lower: float, upper: float, closed_lower: bool = False) -> float:
        """Return the mass of (lower, upper], or [lower, upper] if closed_lower."""
        return sum(
            weight
            for position, weight in zip(self.positions, self.weights)
            if (lower <= position if closed_lower else lower < position)
            and position <= upper
        )

    @property
    def mean(self) -> float:
        """First moment."""
        return float(np.dot(self.positions, self.weights))

    @property
    def second_moment(self) -> float:
        """Second (raw) moment."""
        return float(np.dot(np.square(self.positions), self.weights))

    @property
    def support_bound(self) -> float:
        """Largest absolute atom position."""
        return max(abs(position) for position in self.positions)


@dataclass(frozen=True)
class MomentSequence:
    """Moments m_0 ... m_K of a probability measure, m_0 = 1."""

    values: tuple

    def __post_init__(self):
        """Validate the normalisation."""
        values = tuple(self.values)
        object.__setattr__(self, 'values', values)
        if len(values) == 0 or values[0] != 1:
            raise LoewnerCombValueError(
                f'A moment sequence starts with m_0 = 1, got {values[:1]}.'
            )

    def __getitem__(self, index):
        return self.values[index]

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @property
    def order(self) -> int:
        """Largest moment order K held in the sequence."""
        return len(self.values) - 1

    def as_array(self) -> np.ndarray:
        """Moments as a float array."""
        return np.array([float(value) for value in self.values])

    def hankel_matrix(self) -> np.ndarray:
        """Return (m_{i+j}) for 0 <= i, j <= floor(K/2)."""
        size = self.order // 2 + 1
        moments = self.as_array()
        return hankel(moments[:size], moments[size - 1 : 2 * size - 1])

    def is_hankel_psd(self, tolerance: float = HANKEL_TOLERANCE) -> bool:
        """True when the Hankel matrix is positive semidefinite.

        The tolerance is relative to the largest Hankel entry.

        """
        matrix = self.hankel_matrix()
        scale = max(1.0, float(np.max(np.abs(matrix))))
        return bool(np.linalg.eigvalsh(matrix).min() >= -tolerance * scale)

    def max_difference(self, other: 'MomentSequence') -> float:
        """Largest absolute difference over the shared orders."""
        size = min(len(self), len(other))
        return float(
            np.max(np.abs(self.as_array()[:size] - other.as_array()[:size]))
        )


def arcsine_moments(variance: float, order: int) -> MomentSequence:
    """Moments of the centred arcsine law with the given variance.

    The density is 1 / (pi sqrt(2t - x^2)) on (-sqrt(2t), sqrt(2t)), so the
    even moments are C(2j, j) (t/2)^j and the odd moments vanish.

    """
    values = [1.0] + [0.0] * order
    for k in range(2, order + 1, 2):
        values[k] = comb(k, k // 2) * (variance / 2) ** (k // 2)
    return MomentSequence(tuple(values))


class HalfPlaneMap(ABC):
    """A holomorphic self-map of the upper half-plane.

    Concrete maps are immutable. `evaluate` works on complex arrays; use
    `eval_map` (or call the map) for scalar or array input alike.

    """

    @abstractmethod
    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Evaluate on an array of points with positive imaginary part."""

    @abstractmethod
    def support_bound(self) -> float:
        """Radius of a disc containing the support of the underlying measure."""

    def __call__(self, z):
        return eval_map(self, z)


@dataclass(frozen=True)
class Identity(HalfPlaneMap):
    """F-transform of the point mass at 0."""

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=complex)

    def support_bound(self) -> float:
        return 0.0


@dataclass(frozen=True)
class SlitMap(HalfPlaneMap):
    """The map z -> sqrt((z - center)^2 - gap) + center.

    With gap = 2t this is the Loewner map f_t of the constant driver `center`;
    with gap = 4n it is the F-transform of the free Meixner law m_{2n,n,u}.

    """

    center: float
    gap: float

    def __post_init__(self):
        if self.gap < 0:
            raise LoewnerCombValueError(f'Slit gap must be non-negative: {self.gap}')

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return _slit_values(np.asarray(points, dtype=complex), self.center, self.gap)

    def support_bound(self) -> float:
        return abs(self.center) + np.sqrt(self.gap)


@dataclass(frozen=True)
class AtomicF(HalfPlaneMap):
    """F-transform of a finitely supported measure."""

    measure: DiscreteMeasure

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return 1.0 / self.measure.cauchy_transform(points)

    def support_bound(self) -> float:
        return self.measure.support_bound


@dataclass(frozen=True)
class Compose(HalfPlaneMap):
    """The composition F_1 o F_2 o ... o F_k; the last map is applied first."""

    maps: tuple[HalfPlaneMap, ...]

    def __post_init__(self):
        object.__setattr__(self, 'maps', tuple(self.maps))

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        values = np.asarray(points, dtype=complex)
        for half_plane_map in reversed(self.maps):
            values = half_plane_map.evaluate(values)
        return values

    def support_bound(self) -> float:
        # Operator norms add for a sum of monotonically independent variables.
        return sum(half_plane_map.support_bound() for half_plane_map in self.maps)


@dataclass(frozen=True)
class ScaledMap(HalfPlaneMap):
    """The map z -> F(c z) / c, i.e. the F-transform of B -> mu(c B)."""

    inner: HalfPlaneMap
    factor: float

    def __post_init__(self):
        if self.factor <= 0:
            raise LoewnerCombValueError(
                f'Scaling factor must be positive: {self.factor}'
            )

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        scaled = self.factor * np.asarray(points, dtype=complex)
        return self.inner.evaluate(scaled) / self.factor

    def support_bound(self) -> float:
        return self.inner.support_bound() / self.factor


def translation(shift: float) -> AtomicF:
    """F-transform of the point mass at `shift`, i.e. z -> z - shift."""
    return AtomicF(DiscreteMeasure.dirac(shift))


def _slit_values(points: np.ndarray, center: float, gap: float) -> np.ndarray:
    """Array form of branch_sqrt_slit."""
    points = upper_side(points)
    root_gap = np.sqrt(gap)
    shifted = points - center
    on_cut = (shifted.imag == 0) & (np.abs(shifted.real) <= root_gap)
    if np.any(on_cut):
        raise BranchCutError(
            f'Point on the branch cut [{center - root_gap}, {center + root_gap}].'
        )
    return np.sqrt(shifted - root_gap) * np.sqrt(shifted + root_gap) + center


def branch_sqrt_slit(z, center: float, gap: float) -> complex | np.ndarray:
    """Evaluate sqrt((z - center)^2 - gap) + center on the H-preserving branch.

    The radical is computed as sqrt(z - u - sqrt(s)) * sqrt(z - u + sqrt(s))
    with principal roots. This is the branch behaving like z at infinity; on
    the real axis left of the cut it is real and continues the branch from
    minus infinity.

    Raises BranchCutError for real z in [center - sqrt(gap), center + sqrt(gap)].

    """
    if gap < 0:
        raise LoewnerCombValueError(f'Slit gap must be non-negative: {gap}')
    points = np.asarray(z, dtype=complex)
    return _scalar_or_array(points, _slit_values(points, center, gap))


def eval_map(half_plane_map: HalfPlaneMap, z) -> complex | np.ndarray:
    """Evaluate a half-plane map at a point or an array of points."""
    points = np.asarray(z, dtype=complex)
    return _scalar_or_array(points, half_plane_map.evaluate(points))


def _factors(half_plane_map: HalfPlaneMap) -> tuple[HalfPlaneMap, ...]:
    """Flatten nested compositions and drop identities."""
    if isinstance(half_plane_map, Compose):
        return tuple(
            factor for inner in half_plane_map.maps for factor in _factors(inner)
        )
    if isinstance(half_plane_map, Identity):
        return ()
    return (half_plane_map,)


def monotone_convolve(first: HalfPlaneMap, second: HalfPlaneMap) -> HalfPlaneMap:
    """Return the F-transform of mu_first |> mu_second, i.e. first o second."""
    return compose_all([first, second])


def compose_all(maps: Sequence[HalfPlaneMap]) -> HalfPlaneMap:
    """Monotone convolution of several maps, left factor applied last."""
    factors = tuple(factor for each in maps for factor in _factors(each))
    if len(factors) == 0:
        return Identity()
    if len(factors) == 1:
        return factors[0]
    return Compose(factors)


def _moment_difference(first: np.ndarray, second: np.ndarray) -> float:
    """Largest moment change, relative to the moment size once above one."""
    scale = np.maximum(1.0, np.abs(second))
    return float(np.max(np.abs(first - second) / scale))


def _contour_sums(
    half_plane_map: HalfPlaneMap, radius: float, order: int, points: int
) -> np.ndarray:
    """Trapezoid sums (1/2 pi i) int z^k G(z) dz over |z| = radius.

    Nodes sit at the midpoints pi (2j + 1) / N so none lies on the real axis.
    Only the upper half is evaluated; the lower half follows from
    G(conj z) = conj G(z).

    """
    angles = np.pi * (2 * np.arange(points // 2) + 1) / points
    nodes = radius * np.exp(1j * angles)
    cauchy = 1.0 / half_plane_map.evaluate(nodes)
    powers = nodes[np.newaxis, :] ** np.arange(1, order + 2)[:, np.newaxis]
    return 2.0 / points * np.real(powers @ cauchy)


def _normalized_moments(
    half_plane_map: HalfPlaneMap, radius: float, order: int, points: int
) -> np.ndarray:
    """Contour moments with the m_0 check applied."""
    sums = _contour_sums(half_plane_map, radius, order, points)
    if not np.isfinite(sums).all() or abs(sums[0] - 1.0) >= NORMALIZATION_TOLERANCE:
        raise ContourError(
            f'Contour of radius {radius} gives m_0 = {sums[0]}; '
            'the radius is inside the support or the branch is wrong.'
        )
    sums[0] = 1.0
    return sums


def moments_by_contour(
    half_plane_map: HalfPlaneMap,
    radius: float,
    order: int,
    points: int = DEFAULT_QUADRATURE_POINTS,
) -> MomentSequence:
    """Read the moments of mu off its F-transform by contour quadrature.

    m_k = (1/2 pi i) int_{|z|=R} z^k / F(z) dz. The quadrature size starts at
    `points` and is doubled until two successive sizes agree within 1e-8
    (relative once a moment exceeds one); two doublings are allowed.

    Raises ContourError if m_0 is not 1 within 1e-6 or the sums do not settle.

    """
    if points < MINIMUM_QUADRATURE_POINTS or points & (points - 1):
        raise LoewnerCombValueError(
            f'Quadrature size must be a power of two >= 256: {points}'
        )
    if radius <= 0 or order < 0:
        raise LoewnerCombValueError(
            f'Invalid contour radius {radius} or order {order}.'
        )

    current = _normalized_moments(half_plane_map, radius, order, points)
    for _ in range(2):
        points *= 2
        refined = _normalized_moments(half_plane_map, radius, order, points)
        if _moment_difference(current, refined) <= STABILITY_TOLERANCE:
            return MomentSequence(tuple(float(value) for value in refined))
        current = refined

    raise ContourError(
        f'Contour moments at radius {radius} did not settle after two doublings.'
    )


def adaptive_contour_moments(
    half_plane_map: HalfPlaneMap,
    seed_radius: float,
    order: int,
    points: int = DEFAULT_QUADRATURE_POINTS,
    max_attempts: int = 12,
) -> tuple[MomentSequence, float]:
    """Contour moments with a self-validating radius.

    Starting at `seed_radius`, the radius grows by 50% until the m_0 check
    passes and the moments agree with those on a 50% larger circle within
    1e-8, measured relative to the moment once it exceeds one.

    Returns the moments and the accepted radius.

    """
    radius = seed_radius
    for _ in range(max_attempts):
        try:
            moments = moments_by_contour(half_plane_map, radius, order, points)
            wider = moments_by_contour(
                half_plane_map, RADIUS_GROWTH * radius, order, points
            )
        except ContourError:
            radius *= RADIUS_GROWTH
            continue

        if (
            _moment_difference(moments.as_array(), wider.as_array())
            <= STABILITY_TOLERANCE
        ):
            return moments, radius
        radius *= RADIUS_GROWTH

    raise ContourError(
        f'No stable contour radius found between {seed_radius} and {radius}.'
    )


class DensityEstimate(NamedTuple):
    """Result of a Stieltjes inversion at one point."""

    value: float
    epsilon: float
    converged: bool


def _mollified_density(half_plane_map: HalfPlaneMap, x: float, epsilon: float):
    """-(1/pi) Im G(x + i epsilon)."""
    value = eval_map(half_plane_map, complex(x, epsilon))
    return float(-(1.0 / value).imag / np.pi)


def stieltjes_density(
    half_plane_map: HalfPlaneMap, x: float, epsilon: float = 1.0
) -> DensityEstimate:
    """Density of mu at x by Stieltjes-Perron inversion.

    epsilon is halved until two successive mollified values differ by less
    than 1e-6. If epsilon drops below 1e-12 first (e.g. at an atom), the last
    value is returned with converged=False.

    """
    if not 0 < epsilon <= 1:
        raise LoewnerCombValueError(f'epsilon must lie in (0, 1]: {epsilon}')

    previous = _mollified_density(half_plane_map, x, epsilon)
    while epsilon / 2 >= MINIMUM_DENSITY_EPSILON:
        epsilon /= 2
        current = _mollified_density(half_plane_map, x, epsilon)
        if abs(current - previous) < DENSITY_TOLERANCE:
            return DensityEstimate(current, epsilon, True)
        previous = current

    return DensityEstimate(previous, epsilon, False)


def atom_mass(half_plane_map: HalfPlaneMap, x0: float) -> float:
    """Mass of the atom of mu at x0, or 0 when there is none.

    The limit of -epsilon Im G(x0 + i epsilon) is estimated from
    epsilon = 1e-2 ... 1e-10 with a Richardson table in powers of
    sqrt(epsilon), since at a square root edge of the support the samples
    decay like sqrt(epsilon).

    """
    samples = [
        -epsilon * (1.0 / eval_map(half_plane_map, complex(x0, epsilon))).imag
        for epsilon in ATOM_EPSILONS
    ]

    ratio = np.sqrt(ATOM_EPSILONS[0] / ATOM_EPSILONS[1])
    table = [samples]
    for level in range(1, len(samples)):
        factor = ratio**level
        previous = table[-1]
        table.append(
            [
                (factor * finer - coarser) / (factor - 1)
                for coarser, finer in zip(previous, previous[1:])
            ]
        )

    estimate = table[-1][0]
    return float(estimate) if estimate >= ATOM_THRESHOLD else 0.0
