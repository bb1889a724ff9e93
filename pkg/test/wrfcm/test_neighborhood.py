import math
from unittest import TestCase

import numpy as np

from wrfcm.neighborhood import build_neighborhood


class TestNeighbors(TestCase):

    def test_size_Should_CountEveryPixel(self):
        for width, height in ((1, 1), (3, 2), (5, 7)):
            with self.subTest(width=width, height=height):
                self.assertEqual(width * height, build_neighborhood(width, height, 1).size)

    def test_neighbors_Should_ReturnFullWindow_When_PixelIsCentered(self):
        nbhd = build_neighborhood(3, 3, 1)

        indices, weights = nbhd.neighbors(4)

        self.assertEqual(list(range(9)), indices.tolist())
        diagonal = 1 / (1 + math.sqrt(2))
        expected = [diagonal, 0.5, diagonal, 0.5, 1.0, 0.5, diagonal, 0.5, diagonal]
        np.testing.assert_allclose(expected, weights, rtol=1e-15)

    def test_neighbors_Should_ReturnItself_When_ImageHasOnePixel(self):
        nbhd = build_neighborhood(1, 1, 1)

        indices, weights = nbhd.neighbors(0)

        self.assertEqual([0], indices.tolist())
        self.assertEqual([1.0], weights.tolist())

    def test_neighbors_Should_TruncateWindow_When_PixelIsInCorner(self):
        nbhd = build_neighborhood(3, 3, 1)

        for j, expected in ((0, [0, 1, 3, 4]), (2, [1, 2, 4, 5]), (8, [4, 5, 7, 8])):
            with self.subTest(j=j):
                indices, _ = nbhd.neighbors(j)
                self.assertEqual(expected, indices.tolist())

    def test_neighbors_Should_RaiseIndexError_When_PixelIsOutside(self):
        nbhd = build_neighborhood(3, 3, 1)

        for j in (-1, 9, 100):
            with self.subTest(j=j):
                with self.assertRaises(IndexError):
                    nbhd.neighbors(j)

    def test_neighbors_Should_BeSymmetric(self):
        for width, height, radius in ((5, 4, 1), (4, 6, 2), (7, 1, 3)):
            nbhd = build_neighborhood(width, height, radius)
            windows = [dict(zip(*nbhd.neighbors(j))) for j in range(nbhd.size)]

            with self.subTest(width=width, height=height, radius=radius):
                for j, window in enumerate(windows):
                    for n, s in window.items():
                        self.assertIn(j, windows[n])
                        self.assertEqual(s, windows[n][j])


class TestWindowSum(TestCase):

    def _explicit_sum(self, nbhd, values):
        out = np.zeros_like(values, dtype=np.float64)
        for j in range(nbhd.size):
            indices, weights = nbhd.neighbors(j)
            out[j] = np.tensordot(weights, values[indices], axes=1)
        return out

    def test_window_sum_Should_MatchExplicitLoop(self):
        rng = np.random.default_rng(3)

        for width, height, radius in ((5, 4, 1), (6, 5, 2), (1, 1, 1), (3, 8, 0)):
            nbhd = build_neighborhood(width, height, radius)

            for shape in ((nbhd.size,), (nbhd.size, 3)):
                values = rng.uniform(-10, 10, size=shape)
                with self.subTest(width=width, height=height, radius=radius, shape=shape):
                    np.testing.assert_allclose(self._explicit_sum(nbhd, values), nbhd.window_sum(values),
                                               rtol=1e-12, atol=1e-12)

    def test_weight_totals_Should_SumWindowWeights(self):
        nbhd = build_neighborhood(3, 3, 1)

        totals = nbhd.weight_totals

        self.assertAlmostEqual(3 + 4 / (1 + math.sqrt(2)), totals[4], places=12)
        self.assertAlmostEqual(2 + 1 / (1 + math.sqrt(2)), totals[0], places=12)

    def test_window_sum_Should_BeIdentity_When_RadiusIsZero(self):
        nbhd = build_neighborhood(4, 3, 0)
        values = np.arange(12.0)

        np.testing.assert_array_equal(values, nbhd.window_sum(values))


class TestBuildNeighborhood(TestCase):

    def test_build_neighborhood_Should_RaiseValueError_When_GivenInvalidArguments(self):
        for width, height, radius in ((0, 3, 1), (3, 0, 1), (3, 3, -1)):
            with self.subTest(width=width, height=height, radius=radius):
                with self.assertRaises(ValueError):
                    build_neighborhood(width, height, radius)
