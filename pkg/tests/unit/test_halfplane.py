"""Tests covering the halfplane module."""

from unittest import TestCase

import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from loewner_comb.exceptions import (
    BranchCutError,
    ContourError,
    LoewnerCombValueError,
)
from loewner_comb.halfplane import (
    AtomicF,
    Compose,
    DiscreteMeasure,
    Identity,
    MomentSequence,
    ScaledMap,
    SlitMap,
    adaptive_contour_moments,
    arcsine_moments,
    atom_mass,
    branch_sqrt_slit,
    compose_all,
    eval_map,
    moments_by_contour,
    monotone_convolve,
    stieltjes_density,
    translation,
)
from tests.unit.utility import upper_half_plane_points


class TestBranchSqrtSlit(TestCase):
    """The H-preserving branch of sqrt((z - u)^2 - s) + u."""

    def test_closed_form_values(self):
        with self.subTest('point on the imaginary axis'):
            self.assertAlmostEqual(
                branch_sqrt_slit(2j, 0, 2), np.sqrt(6) * 1j, places=12
            )

        with self.subTest('real point right of the cut'):
            self.assertAlmostEqual(branch_sqrt_slit(10, 0, 2), np.sqrt(98), places=12)

        with self.subTest('real point left of the cut continues from -infinity'):
            self.assertAlmostEqual(branch_sqrt_slit(-2, 1, 8), 0, places=12)

    def test_left_of_cut_matches_limit_from_above(self):
        below_limit = branch_sqrt_slit(-5 + 1e-9j, 1, 8)
        self.assertAlmostEqual(branch_sqrt_slit(-5.0, 1, 8), below_limit, places=7)
        self.assertLess(branch_sqrt_slit(-5.0, 1, 8).real, 1)

    def test_negative_zero_imaginary_part(self):
        """A -0.0 imaginary part is treated as approaching from above."""
        self.assertAlmostEqual(
            branch_sqrt_slit(complex(-5.0, -0.0), 1, 8),
            branch_sqrt_slit(-5.0, 1, 8),
            places=12,
        )

    def test_points_on_the_cut_raise(self):
        for point in [1.0, 1 + np.sqrt(8), 1 - np.sqrt(8), 2.5]:
            with self.subTest(point=point):
                with self.assertRaisesRegex(BranchCutError, 'branch cut'):
                    branch_sqrt_slit(point, 1, 8)

    def test_negative_gap_raises(self):
        with self.assertRaises(LoewnerCombValueError):
            branch_sqrt_slit(1j, 0, -1)

    def test_array_input(self):
        values = branch_sqrt_slit(np.array([2j, 10]), 0, 2)
        assert_allclose(values, [np.sqrt(6) * 1j, np.sqrt(98)], rtol=1e-14)

    @given(
        st.floats(-1e3, 1e3),
        st.floats(1e-3, 1e3),
        st.floats(-5, 5),
        st.floats(0, 10),
    )
    def test_radical_identity(self, x, y, center, gap):
        point = complex(x, y)
        value = branch_sqrt_slit(point, center, gap)
        residual = value**2 - (
            (point - center) ** 2 - gap + 2 * center * value - center**2
        )
        scale = 1 + abs(point - center) ** 2 + gap + center**2 + abs(value) ** 2
        self.assertLess(abs(residual) / scale, 1e-12)


class TestEvalMap(TestCase):
    """Evaluation of the half-plane map variants."""

    def test_variants(self):
        with self.subTest('identity'):
            self.assertEqual(eval_map(Identity(), 1j), 1j)

        with self.subTest('slit map'):
            self.assertAlmostEqual(
                eval_map(SlitMap(0, 4), 2j), 2 * np.sqrt(2) * 1j, places=12
            )

        with self.subTest('composition applies the last map first'):
            self.assertAlmostEqual(
                eval_map(Compose((SlitMap(0, 4), SlitMap(0, 4))), 2j),
                2 * np.sqrt(3) * 1j,
                places=12,
            )

        with self.subTest('atomic measure'):
            measure = DiscreteMeasure((0.0, 1.0), (0.5, 0.5))
            point = 0.3 + 2j
            expected = 1 / (0.5 / point + 0.5 / (point - 1))
            self.assertAlmostEqual(
                eval_map(AtomicF(measure), point), expected, places=14
            )

    def test_scaled_map(self):
        point = 0.5 + 1j
        self.assertAlmostEqual(
            eval_map(ScaledMap(SlitMap(1, 4), 2.0), point),
            eval_map(SlitMap(1, 4), 2 * point) / 2,
            places=14,
        )

    def test_half_plane_preservation(self):
        points = upper_half_plane_points(1000, seed=7)
        maps = {
            'identity': Identity(),
            'slit': SlitMap(1.5, 8),
            'atomic': AtomicF(DiscreteMeasure((-1.0, 0.25, 3.0), (0.2, 0.5, 0.3))),
            'composed': Compose((SlitMap(0, 4), translation(-2.0), SlitMap(3, 2))),
            'scaled': ScaledMap(SlitMap(2, 12), 3.0),
        }
        for name, half_plane_map in maps.items():
            with self.subTest(name):
                self.assertTrue(np.all(eval_map(half_plane_map, points).imag > 0))

    def test_scalar_and_array_outputs(self):
        self.assertIsInstance(eval_map(SlitMap(0, 2), 1j), complex)
        self.assertEqual(eval_map(SlitMap(0, 2), np.array([1j, 2j])).shape, (2,))


class TestMonotoneConvolve(TestCase):
    """Monotone convolution as composition of F-transforms."""

    def test_translations_add(self):
        point = 0.7 + 1.3j
        self.assertAlmostEqual(
            eval_map(monotone_convolve(translation(1.5), translation(-0.25)), point),
            point - 1.25,
            places=14,
        )

    def test_arcsine_variances_add(self):
        points = upper_half_plane_points(20, seed=3)
        convolved = monotone_convolve(SlitMap(0, 2 * 0.4), SlitMap(0, 2 * 1.1))
        assert_allclose(
            eval_map(convolved, points),
            eval_map(SlitMap(0, 2 * 1.5), points),
            rtol=1e-12,
        )

    def test_meixner_variances_add(self):
        convolved = monotone_convolve(SlitMap(0, 4), SlitMap(0, 12))
        moments = moments_by_contour(convolved, 8, 2)
        self.assertAlmostEqual(moments[2], 2 + 6, delta=1e-8)

    def test_flattening(self):
        first, second, third = SlitMap(0, 1), SlitMap(1, 2), SlitMap(2, 3)
        convolved = monotone_convolve(
            monotone_convolve(first, Identity()), Compose((second, third))
        )
        self.assertEqual(convolved.maps, (first, second, third))
        self.assertIs(monotone_convolve(Identity(), first), first)
        self.assertIsInstance(compose_all([]), Identity)

    def test_meixner_decomposes_into_translated_arcsine(self):
        """sqrt((z - u)^2 - 4n) + u is delta_{-u} |> arcsine(2n) |> delta_u."""
        points = upper_half_plane_points(20, seed=11)
        decomposed = compose_all([translation(-2.0), SlitMap(0, 12), translation(2.0)])
        assert_allclose(
            eval_map(decomposed, points), eval_map(SlitMap(2, 12), points), rtol=1e-12
        )


class TestMomentsByContour(TestCase):
    """Moments read off F-transforms by contour quadrature."""

    def test_closed_form_moments(self):
        with self.subTest('arcsine of variance 2'):
            moments = moments_by_contour(SlitMap(0, 4), 4, 6)
            assert_allclose(moments.as_array(), [1, 0, 2, 0, 6, 0, 20], atol=1e-8)

        with self.subTest('point mass at 0'):
            moments = moments_by_contour(Identity(), 1, 4)
            assert_allclose(moments.as_array(), [1, 0, 0, 0, 0], atol=1e-12)

        with self.subTest('shifted free Meixner law'):
            moments = moments_by_contour(SlitMap(1, 4), 6, 2)
            assert_allclose(moments.as_array(), [1, 0, 2], atol=1e-8)

    def test_m0_is_exactly_one(self):
        self.assertEqual(moments_by_contour(SlitMap(1, 8), 8, 3)[0], 1.0)

    def test_radius_inside_support_raises(self):
        with self.assertRaisesRegex(ContourError, 'm_0'):
            moments_by_contour(SlitMap(0, 4), 1, 2)

    def test_invalid_quadrature_size(self):
        for points in [128, 1000]:
            with self.subTest(points=points):
                with self.assertRaises(LoewnerCombValueError):
                    moments_by_contour(SlitMap(0, 4), 4, 2, points)

    def test_radius_stability(self):
        moments = moments_by_contour(SlitMap(1, 8), 6, 6)
        wider = moments_by_contour(SlitMap(1, 8), 9, 6)
        assert_allclose(moments.as_array(), wider.as_array(), rtol=1e-8, atol=1e-8)

    def test_large_moments_settle(self):
        """m_8 is about 5e7 here, so rounding alone exceeds an absolute 1e-8."""
        measure = DiscreteMeasure((5.0, 10.0), (0.5, 0.5))
        expected = [0.5 * 5.0**k + 0.5 * 10.0**k for k in range(9)]
        with self.subTest('fixed radius'):
            moments = moments_by_contour(AtomicF(measure), 15, 8)
            assert_allclose(moments.as_array(), expected, rtol=1e-9)
        with self.subTest('adaptive radius'):
            moments, _ = adaptive_contour_moments(AtomicF(measure), 11, 8)
            assert_allclose(moments.as_array(), expected, rtol=1e-9)

    def test_meixner_mean_and_variance(self):
        for n in range(1, 6):
            for u in range(4):
                with self.subTest(n=n, u=u):
                    slit_map = SlitMap(u, 4 * n)
                    moments = moments_by_contour(
                        slit_map, 1.5 * slit_map.support_bound() + 1, 2
                    )
                    self.assertAlmostEqual(moments[1], 0, delta=1e-8)
                    self.assertAlmostEqual(moments[2], 2 * n, delta=1e-8)

    def test_variances_add_over_copies(self):
        for copies in [2, 3, 5]:
            with self.subTest(copies=copies):
                composed = compose_all([SlitMap(0, 8)] * copies)
                moments, _ = adaptive_contour_moments(composed, 2, 2)
                self.assertAlmostEqual(moments[2], 4 * copies, delta=1e-8)

    def test_adaptive_radius_grows_from_a_small_seed(self):
        moments, radius = adaptive_contour_moments(SlitMap(0, 4), 0.5, 4)
        self.assertGreater(radius, 2)
        assert_allclose(moments.as_array(), [1, 0, 2, 0, 6], atol=1e-8)

    def test_hankel_positivity(self):
        for half_plane_map in [SlitMap(1, 8), Compose((SlitMap(0, 4), SlitMap(3, 8)))]:
            with self.subTest(half_plane_map=half_plane_map):
                moments, _ = adaptive_contour_moments(half_plane_map, 1, 8)
                self.assertTrue(moments.is_hankel_psd())


class TestMomentSequence(TestCase):
    """MomentSequence validation and Hankel checks."""

    def test_m0_must_be_one(self):
        with self.assertRaisesRegex(LoewnerCombValueError, 'm_0 = 1'):
            MomentSequence((2, 0, 1))

    def test_hankel_matrix(self):
        moments = MomentSequence((1, 0, 2, 0, 6))
        assert_allclose(moments.hankel_matrix(), [[1, 0, 2], [0, 2, 0], [2, 0, 6]])
        self.assertEqual(moments.order, 4)

    def test_negative_variance_is_not_psd(self):
        self.assertFalse(MomentSequence((1, 0, -1)).is_hankel_psd())

    def test_arcsine_moments(self):
        self.assertEqual(arcsine_moments(1, 4).values, (1.0, 0.0, 1.0, 0.0, 1.5))
        self.assertEqual(
            arcsine_moments(2, 6).values, (1.0, 0.0, 2.0, 0.0, 6.0, 0.0, 20.0)
        )


class TestDiscreteMeasure(TestCase):
    """DiscreteMeasure invariants."""

    def test_invalid_measures(self):
        invalid = {
            'weights do not sum to one': ((0.0, 1.0), (0.5, 0.4)),
            'non-positive weight': ((0.0, 1.0), (1.0, 0.0)),
            'unsorted positions': ((1.0, 0.0), (0.5, 0.5)),
            'length mismatch': ((0.0,), (0.5, 0.5)),
            'empty': ((), ()),
        }
        for name, (positions, weights) in invalid.items():
            with self.subTest(name):
                with self.assertRaises(LoewnerCombValueError):
                    DiscreteMeasure(positions, weights)

    def test_from_atoms_sorts_and_merges(self):
        measure = DiscreteMeasure.from_atoms(
            [(0.7, 0.25), (0.2, 0.5), (0.7, 0.25), (1.0, 0)]
        )
        self.assertEqual(measure.positions, (0.2, 0.7))
        self.assertEqual(measure.weights, (0.5, 0.5))

    def test_moments_and_mass(self):
        measure = DiscreteMeasure((0.0, 0.5, 1.0), (0.25, 0.25, 0.5))
        self.assertAlmostEqual(measure.mean, 0.625)
        self.assertAlmostEqual(measure.second_moment, 0.5625)
        self.assertEqual(measure.mass(0.0, 0.5), 0.25)
        self.assertEqual(measure.mass(0.0, 0.5, closed_lower=True), 0.5)
        self.assertEqual(measure.support_bound, 1.0)


class TestStieltjesInversion(TestCase):
    """Densities and atoms recovered from F-transforms."""

    def test_densities(self):
        with self.subTest('arcsine at the centre'):
            estimate = stieltjes_density(SlitMap(0, 2), 0)
            self.assertTrue(estimate.converged)
            self.assertAlmostEqual(estimate.value, 1 / (np.pi * np.sqrt(2)), delta=1e-5)

        with self.subTest('arcsine outside the support'):
            self.assertAlmostEqual(
                stieltjes_density(SlitMap(0, 2), 3).value, 0, delta=1e-5
            )

        with self.subTest('free Meixner law at its centre'):
            self.assertAlmostEqual(
                stieltjes_density(SlitMap(1, 8), 1).value,
                2 * np.sqrt(2) / (9 * np.pi),
                delta=1e-5,
            )

    def test_density_at_an_atom_does_not_converge(self):
        point_mass = AtomicF(DiscreteMeasure.dirac(0.5))
        self.assertFalse(stieltjes_density(point_mass, 0.5).converged)

    def test_invalid_epsilon(self):
        with self.assertRaises(LoewnerCombValueError):
            stieltjes_density(SlitMap(0, 2), 0, epsilon=2)

    def test_atom_masses(self):
        with self.subTest('free Meixner atom at -2'):
            self.assertAlmostEqual(atom_mass(SlitMap(1, 8), -2), 1 / 3, delta=1e-6)

        with self.subTest('absolutely continuous arcsine'):
            self.assertEqual(atom_mass(SlitMap(0, 2), 0), 0.0)

        with self.subTest('edges of the support'):
            for half_plane_map, edge in [
                (SlitMap(0, 2), np.sqrt(2)),
                (SlitMap(0, 2), -np.sqrt(2)),
                (SlitMap(1, 8), 1 + np.sqrt(8)),
            ]:
                self.assertEqual(atom_mass(half_plane_map, edge), 0.0)

        with self.subTest('point mass'):
            self.assertAlmostEqual(
                atom_mass(AtomicF(DiscreteMeasure.dirac(0.3)), 0.3), 1.0
            )
