"""Tests covering the walks module."""

from itertools import combinations
from unittest import TestCase

import numpy as np
from numpy.testing import assert_allclose

from loewner_comb.exceptions import LoewnerCombValueError, TruncationTooShallow
from loewner_comb.graphs import (
    SpidernetSpec,
    build_spidernet,
    comb_ball,
    path_graph,
    star_graph,
)
from loewner_comb.halfplane import SlitMap, compose_all, moments_by_contour
from loewner_comb.walks import (
    EmbeddedOperator,
    adjacency_vs_sum,
    check_monotone_factorization,
    embedded_moment,
    root_moments,
)


class TestRootMoments(TestCase):
    """Closed walk counts at the root."""

    def test_small_graphs(self):
        with self.subTest('path rooted at an end'):
            self.assertEqual(root_moments(path_graph(3), 4).values, (1, 0, 1, 0, 2))
        with self.subTest('star rooted at the centre'):
            self.assertEqual(
                root_moments(star_graph(3), 6).values, (1, 0, 3, 0, 9, 0, 27)
            )

    def test_arcsine_spidernet(self):
        """The spidernet (2, 2, 1) is a half-line with a doubled root edge."""
        graph = build_spidernet(SpidernetSpec(2, 2, 1, 4))
        self.assertEqual(
            root_moments(graph, 8).values, (1, 0, 2, 0, 6, 0, 20, 0, 70)
        )

    def test_counts_are_exact_integers(self):
        moments = root_moments(build_spidernet(SpidernetSpec.meixner(4, 4, 4)), 8)
        self.assertTrue(all(isinstance(value, int) for value in moments))

    def test_spidernets_follow_free_meixner_laws(self):
        """Spidernet (2n, n + 1 + u, n) has F = sqrt((z - u)^2 - 4n) + u."""
        for n, u in [(1, 0), (1, 1), (2, 1), (2, 3), (4, 4)]:
            with self.subTest(n=n, u=u):
                graph = build_spidernet(SpidernetSpec.meixner(n, u, 4))
                slit_map = SlitMap(u, 4 * n)
                analytic = moments_by_contour(slit_map, slit_map.support_bound() + 4, 8)
                assert_allclose(
                    root_moments(graph, 8).as_array(),
                    analytic.as_array(),
                    rtol=1e-8,
                    atol=1e-6,
                )

    def test_truncation_depth_of_half_the_order_is_enough(self):
        spec = SpidernetSpec.meixner(1, 1, 0)
        for order in range(9):
            with self.subTest(order=order):
                shallow = build_spidernet(spec._replace(depth=order // 2))
                deep = build_spidernet(spec._replace(depth=order // 2 + 2))
                self.assertEqual(
                    root_moments(shallow, order).values,
                    root_moments(deep, order).values,
                )

    def test_shallow_truncation(self):
        graph = build_spidernet(SpidernetSpec(2, 2, 1, 1))
        self.assertEqual(root_moments(graph, 3).values, (1, 0, 2, 0))
        with self.assertRaisesRegex(TruncationTooShallow, 'radius 2, got 1'):
            root_moments(graph, 4)

    def test_negative_order(self):
        with self.assertRaisesRegex(LoewnerCombValueError, 'non-negative'):
            root_moments(path_graph(2), -1)


class TestEmbeddedOperators(TestCase):
    """I (x) ... (x) A_j (x) P (x) ... (x) P on comb products."""

    def test_matrix(self):
        matrix = EmbeddedOperator((path_graph(2), path_graph(2)), 0).matrix()
        expected = np.zeros((4, 4), dtype=int)
        expected[0, 2] = expected[2, 0] = 1
        self.assertEqual(matrix.toarray().tolist(), expected.tolist())

    def test_apply_annihilates_non_root_tail(self):
        operator = EmbeddedOperator((path_graph(3), path_graph(2)), 0)
        self.assertEqual(operator.apply({(0, 0): 2, (1, 1): 5}), {(1, 0): 2})

    def test_position_range(self):
        with self.assertRaisesRegex(LoewnerCombValueError, 'outside a word'):
            EmbeddedOperator((path_graph(2),), 1)

    def test_embedded_moments(self):
        word = (star_graph(2), path_graph(3))
        with self.subTest('empty pattern'):
            self.assertEqual(embedded_moment(word, []), 1)
        with self.subTest('single factors keep their own law'):
            self.assertEqual(embedded_moment(word, [(0, 4)]), 4)
            self.assertEqual(embedded_moment(word, [(1, 4)]), 2)
        with self.subTest('negative power'):
            with self.assertRaisesRegex(LoewnerCombValueError, 'non-negative'):
                embedded_moment(word, [(0, -1)])

    def test_monotone_factorization(self):
        words = {
            'star and path': ([star_graph(2), path_graph(3)], (0, 1)),
            'outer pair of three': (
                [path_graph(3), star_graph(2), path_graph(2)],
                (0, 2),
            ),
            'spidernets': (
                [SpidernetSpec.meixner(1, 1, 2), SpidernetSpec.meixner(1, 0, 2)],
                (0, 1),
            ),
        }
        for name, (word, positions) in words.items():
            with self.subTest(name):
                self.assertTrue(
                    all(
                        check_monotone_factorization(word, p, q, r, positions)
                        for p in range(4)
                        for q in range(4)
                        for r in range(4)
                    )
                )

    def test_factorization_up_to_total_order_eight(self):
        edge = path_graph(2)
        spidernet = build_spidernet(SpidernetSpec(2, 2, 1, 3))
        words = {
            'edge and spidernet': [edge, spidernet],
            'two spidernets': [spidernet, spidernet],
            'three edges': [edge, edge, edge],
            'spidernet, edge, spidernet': [spidernet, edge, spidernet],
        }
        for name, word in words.items():
            for positions in combinations(range(len(word)), 2):
                with self.subTest(name, positions=positions):
                    self.assertTrue(
                        all(
                            check_monotone_factorization(word, p, q, r, positions)
                            for p in range(9)
                            for q in range(9 - p)
                            for r in range(9 - p - q)
                        )
                    )

    def test_factorization_positions(self):
        with self.assertRaisesRegex(LoewnerCombValueError, 'positions i < j'):
            check_monotone_factorization(
                [path_graph(2), path_graph(2)], 1, 1, 1, (1, 0)
            )

    def test_adjacency_is_sum_of_embedded_operators(self):
        words = {
            'two paths': [path_graph(2), path_graph(3)],
            'three factors': [path_graph(2), star_graph(2), path_graph(3)],
            'spidernets': [SpidernetSpec.meixner(1, 1, 2), SpidernetSpec(2, 2, 1, 2)],
            'spidernet, edge, spidernet': [
                SpidernetSpec(2, 2, 1, 3),
                path_graph(2),
                SpidernetSpec(2, 2, 1, 3),
            ],
        }
        for name, word in words.items():
            with self.subTest(name):
                self.assertTrue(adjacency_vs_sum(word))

    def test_explicit_product_size(self):
        with self.assertRaisesRegex(LoewnerCombValueError, 'exceeds 10000'):
            adjacency_vs_sum([star_graph(100), star_graph(100)])


class TestCombMoments(TestCase):
    """Root moments of comb products are monotone convolutions."""

    def test_comb_ball_matches_composition(self):
        word = [SpidernetSpec.meixner(1, 0, 3), SpidernetSpec.meixner(1, 1, 3)]
        analytic = moments_by_contour(
            compose_all([SlitMap(0, 4), SlitMap(1, 4)]), 8, 6
        )
        assert_allclose(
            root_moments(comb_ball(word, 3), 6).as_array(),
            analytic.as_array(),
            atol=1e-8,
        )

    def test_ball_radius_limits_order(self):
        word = [path_graph(3), path_graph(3)]
        with self.assertRaises(TruncationTooShallow):
            root_moments(comb_ball(word, 1), 4)
