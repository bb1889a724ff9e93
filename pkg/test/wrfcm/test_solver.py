import math
import time
from unittest import TestCase

import numpy as np
from scipy.optimize import minimize_scalar

from wrfcm.config import SolverConfig
from wrfcm.fcm import fcm_fit, initial_prototypes
from wrfcm.image import ImageTensor, betas_from_phi, channel_stddev
from wrfcm.metrics import report
from wrfcm.neighborhood import build_neighborhood
from wrfcm.noise import ImpulseKind, NoiseSpec, corrupt
from wrfcm.solver import (FidelityDomainError, FidelityKind, objective,
                          objective_by_neighbors, update_membership,
                          update_prototypes, update_residual, update_weights,
                          fidelity_eval, wrfcm_fit)
from wrfcm.synthetic import Geometry, SyntheticSpec, gen_synthetic


def random_instance(seed, width=6, height=5, c=3, channels=1, scale=255.0):
    rng = np.random.default_rng(seed)
    k = width * height
    image = ImageTensor(width, height, rng.uniform(0, scale, size=(k, channels)))
    u = rng.dirichlet(np.ones(c), size=k).T
    v = rng.uniform(0, scale, size=(c, channels))
    r = rng.normal(0, scale / 10, size=(k, channels))
    w = rng.uniform(0.1, 1.0, size=(k, channels))
    beta = rng.uniform(0.5, 5.0, size=channels)
    return image, u, v, r, w, beta


SMALL_SHAPES = ((3, 3), (3, 2), (2, 3))


def small_instances(count=25, scale=255.0):
    # count seeds for each (c, L) in {2, 3} x {1, 3}, every image holding at most 9 pixels
    for seed in range(count):
        for c in (2, 3):
            for channels in (1, 3):
                width, height = SMALL_SHAPES[seed % len(SMALL_SHAPES)]
                instance = random_instance(1000 * c + 100 * channels + seed, width, height, c, channels, scale)
                yield (seed, c, channels), instance


def simplex_minimizer(d, m, total=1.0):
    """Minimizes sum_i a_i^m d_i over {a >= 0, sum a = total} with nested bounded searches."""
    if len(d) == 1:
        return [total]

    def rest(a):
        tail = simplex_minimizer(d[1:], m, total - a)
        return sum(t ** m * di for t, di in zip(tail, d[1:]))

    result = minimize_scalar(lambda a: a ** m * d[0] + rest(a), bounds=(0.0, total), method='bounded',
                             options={'xatol': 1e-12})
    return [result.x] + simplex_minimizer(d[1:], m, total - result.x)


def explicit_objective(image, u, v, r, w, nbhd, beta, m):
    total = 0.0
    y = image.data - r
    for j in range(nbhd.size):
        indices, weights = nbhd.neighbors(j)
        for n, s in zip(indices, weights):
            for i in range(len(v)):
                total += u[i, j] ** m * s * np.sum((y[n] - v[i]) ** 2)
            total += s * np.sum(beta * (w[n] * r[n]) ** 2)
    return total


class TestObjective(TestCase):

    def test_objective_Should_EvaluateHandExample_When_ImageHasOnePixel(self):
        image = ImageTensor(1, 1, [10.0])
        nbhd = build_neighborhood(1, 1, 1)
        args = (image, np.array([[1.0]]), np.array([[4.0]]), np.array([[1.0]]), np.array([[1.0]]), nbhd,
                np.array([2.0]))

        self.assertAlmostEqual(27.0, objective(*args))
        self.assertAlmostEqual(27.0, objective_by_neighbors(*args))

    def test_objective_Should_MatchExplicitSum(self):
        for seed, radius, channels in ((0, 1, 1), (1, 2, 3), (2, 0, 1)):
            image, u, v, r, w, beta = random_instance(seed, channels=channels)
            nbhd = build_neighborhood(image.width, image.height, radius)

            expected = explicit_objective(image, u, v, r, w, nbhd, beta, 2.0)

            with self.subTest(seed=seed, radius=radius, channels=channels):
                self.assertAlmostEqual(1.0, objective(image, u, v, r, w, nbhd, beta) / expected, places=12)
                self.assertAlmostEqual(1.0, objective_by_neighbors(image, u, v, r, w, nbhd, beta) / expected,
                                       places=12)

    def test_objective_Should_ReduceToSpatialDataTerm_When_ResidualIsZero(self):
        image, u, v, _, _, _ = random_instance(3)
        nbhd = build_neighborhood(image.width, image.height, 1)
        zero = np.zeros_like(image.data)
        ones = np.ones_like(image.data)

        with_beta = objective(image, u, v, zero, ones, nbhd, np.array([1e6]), m=2.5)
        without_beta = objective(image, u, v, zero, ones, nbhd, np.array([0.0]), m=2.5)

        self.assertEqual(with_beta, without_beta)


class TestUpdateMembership(TestCase):

    def test_update_membership_Should_SplitEqually_When_PrototypesAreSymmetric(self):
        image = ImageTensor(3, 1, [5.0, 5.0, 5.0])
        nbhd = build_neighborhood(3, 1, 1)
        v = np.array([[0.0], [10.0]])

        u = update_membership(image, v, np.zeros((3, 1)), nbhd, 2.0)

        np.testing.assert_allclose(np.full((2, 3), 0.5), u)

    def test_update_membership_Should_BeCrisp_When_ResidualCancelsNoise(self):
        image = ImageTensor(4, 1, [12.0, 7.0, 9.0, 15.0])
        nbhd = build_neighborhood(4, 1, 1)
        v = np.array([[10.0], [200.0]])
        r = image.data - 10.0

        u = update_membership(image, v, r, nbhd, 2.0)

        np.testing.assert_array_equal(np.vstack((np.ones(4), np.zeros(4))), u)

    def test_update_membership_Should_MatchSimplexMinimizer(self):
        m = 2.0
        instances = 0

        for key, (image, _, v, r, _, _) in small_instances():
            nbhd = build_neighborhood(image.width, image.height, 1)
            y = image.data - r

            u = update_membership(image, v, r, nbhd, m)

            for j in range(image.size):
                indices, weights = nbhd.neighbors(j)
                d = np.array([np.sum(weights * np.sum((y[indices] - vi) ** 2, axis=1)) for vi in v])
                oracle = simplex_minimizer(list(d / d.max()), m)
                with self.subTest(instance=key, j=j):
                    np.testing.assert_allclose(oracle, u[:, j], rtol=0.0, atol=1e-6)
            instances += 1

        self.assertGreaterEqual(instances, 100)

    def test_update_membership_Should_SatisfyStationarity_When_ClustersAreMany(self):
        # u_ij^(m-1) D_ij is constant over i at the constrained optimum
        image, _, v, r, _, _ = random_instance(6, c=4, channels=3)
        nbhd = build_neighborhood(image.width, image.height, 1)
        m = 2.5

        u = update_membership(image, v, r, nbhd, m)
        y = image.data - r
        distances = nbhd.window_sum(((y[np.newaxis] - v[:, np.newaxis]) ** 2).sum(axis=2).T).T

        products = u ** (m - 1) * distances
        np.testing.assert_allclose(products, np.broadcast_to(products[0], products.shape), rtol=1e-9)


class TestUpdatePrototypes(TestCase):

    def test_update_prototypes_Should_ReturnPixel_When_ImageHasOnePixel(self):
        image = ImageTensor(1, 1, [[30.0, 60.0, 90.0]])
        nbhd = build_neighborhood(1, 1, 1)

        v = update_prototypes(image, np.array([[1.0]]), np.zeros((1, 3)), nbhd, 2.0)

        np.testing.assert_allclose([[30.0, 60.0, 90.0]], v)

    def test_update_prototypes_Should_ReturnConstant_When_ImageIsConstant(self):
        image = ImageTensor(5, 4, np.full(20, 77.0))
        nbhd = build_neighborhood(5, 4, 1)
        u = np.random.default_rng(0).dirichlet(np.ones(3), size=20).T

        v = update_prototypes(image, u, np.zeros((20, 1)), nbhd, 2.0)

        np.testing.assert_allclose(np.full((3, 1), 77.0), v, rtol=1e-12)

    def test_update_prototypes_Should_ZeroObjectiveGradient(self):
        # the objective is quadratic in V, central differences are exact for any step
        h = 1.0
        instances = 0

        for key, (image, u, _, r, w, beta) in small_instances():
            nbhd = build_neighborhood(image.width, image.height, 1)

            v = update_prototypes(image, u, r, nbhd, 2.0)

            for i in range(v.shape[0]):
                for channel in range(v.shape[1]):
                    plus, minus = v.copy(), v.copy()
                    plus[i, channel] += h
                    minus[i, channel] -= h
                    gradient = (objective(image, u, plus, r, w, nbhd, beta)
                                - objective(image, u, minus, r, w, nbhd, beta)) / (2 * h)
                    with self.subTest(instance=key, i=i, channel=channel):
                        self.assertLessEqual(abs(gradient), 1e-6)
            instances += 1

        self.assertGreaterEqual(instances, 100)


class TestUpdateResidual(TestCase):

    def test_update_residual_Should_Vanish_When_FidelityDominates(self):
        image, u, v, _, w, _ = random_instance(8)
        nbhd = build_neighborhood(image.width, image.height, 1)

        r = update_residual(image, u, v, w, nbhd, np.array([1e12]), 2.0)

        self.assertLess(np.max(np.abs(r)), 1e-6)

    def test_update_residual_Should_AbsorbDeviation_When_FidelityIsDisabled(self):
        image, _, _, _, w, _ = random_instance(9, channels=3)
        nbhd = build_neighborhood(image.width, image.height, 1)
        v = np.array([[10.0, 20.0, 30.0]])

        r = update_residual(image, np.ones((1, image.size)), v, w, nbhd, np.zeros(3), 2.0)

        np.testing.assert_allclose(image.data - v, r, rtol=1e-12, atol=1e-12)

    def test_update_residual_Should_MatchScalarMinimizer(self):
        # Every pixel j appears in the windows of its neighbors n, collect the
        # terms of the objective that depend on r_jl and minimize them directly.
        m = 2.0
        instances = 0

        for key, (image, u, v, _, w, beta) in small_instances(scale=1.0):
            nbhd = build_neighborhood(image.width, image.height, 1)
            r = update_residual(image, u, v, w, nbhd, beta, m)
            x = image.data

            for j in range(image.size):
                windows, weights = nbhd.neighbors(j)

                for channel in range(image.channels):
                    def energy(t):
                        total = 0.0
                        for n, s in zip(windows, weights):
                            total += s * np.sum(u[:, n] ** m * (x[j, channel] - t - v[:, channel]) ** 2)
                            total += s * beta[channel] * (w[j, channel] * t) ** 2
                        return total

                    oracle = minimize_scalar(energy, bracket=(-2.0, 2.0), method='golden', tol=1e-10)
                    with self.subTest(instance=key, j=j, channel=channel):
                        self.assertAlmostEqual(oracle.x, r[j, channel], delta=1e-6)
            instances += 1

        self.assertGreaterEqual(instances, 100)

    def test_update_residual_Should_RaiseValueError_When_BetaIsNegative(self):
        image, u, v, _, w, _ = random_instance(10)
        nbhd = build_neighborhood(image.width, image.height, 1)

        with self.assertRaises(ValueError):
            update_residual(image, u, v, w, nbhd, np.array([-1.0]), 2.0)


class TestUpdateWeights(TestCase):

    def test_update_weights(self):
        np.testing.assert_array_equal(np.ones((3, 1)), update_weights(np.zeros((3, 1)), 0.0008))
        np.testing.assert_array_equal(np.ones((2, 1)), update_weights(np.array([[40.0], [-300.0]]), 0.0))
        self.assertAlmostEqual(math.exp(-2), update_weights(np.array([[50.0]]), 0.0008)[0, 0], delta=1e-12)

    def test_update_weights_Should_NotIncrease_When_ResidualGrowsInMagnitude(self):
        rng = np.random.default_rng(17)

        for xi in (1e-5, 0.0008, 0.05):
            r = rng.normal(0.0, 60.0, size=(200, 3))
            larger = np.sign(r) * (np.abs(r) + rng.exponential(20.0, size=r.shape))

            w = update_weights(r, xi)
            w_larger = update_weights(larger, xi)

            order = np.argsort(np.abs(r[:, 0]))
            with self.subTest(xi=xi):
                self.assertTrue(np.all(w >= w_larger))
                self.assertTrue(np.all(np.diff(w[order, 0]) <= 0.0))
                self.assertTrue(np.all((w > 0.0) & (w <= 1.0)))
                np.testing.assert_array_equal(w, update_weights(-r, xi))

    def test_update_weights_Should_RaiseValueError_When_DecayIsNegative(self):
        with self.assertRaises(ValueError):
            update_weights(np.zeros((1, 1)), -1.0)


class TestFidelityEval(TestCase):

    def test_fidelity_eval(self):
        r = np.array([[1.0, -2.0], [-3.0, 0.5]])
        w = np.array([[0.5, 1.0], [1.0, 2.0]])

        np.testing.assert_allclose([10.0, 4.25], fidelity_eval(r, FidelityKind.L2))
        np.testing.assert_allclose([4.0, 2.5], fidelity_eval(r, FidelityKind.L1))
        np.testing.assert_allclose([9.25, 5.0], fidelity_eval(r, FidelityKind.WEIGHTED_L2, w=w))
        np.testing.assert_array_equal([0.0], fidelity_eval(np.zeros((4, 1)), FidelityKind.L2))

    def test_fidelity_eval_Should_VanishAtE_When_KindIsIdiv(self):
        image = ImageTensor(2, 1, [math.e, math.e])

        value = fidelity_eval(np.zeros((2, 1)), FidelityKind.IDIV, image=image)

        self.assertAlmostEqual(0.0, value[0], delta=1e-12)

    def test_fidelity_eval_Should_RaiseDomainError_When_DenoisedValueIsNotPositive(self):
        image = ImageTensor(3, 1, [5.0, 1.0, 4.0])
        r = np.array([[0.0], [2.0], [0.0]])

        with self.assertRaises(FidelityDomainError) as context:
            fidelity_eval(r, FidelityKind.IDIV, image=image)

        self.assertEqual(1, context.exception.pixel)
        self.assertEqual(0, context.exception.channel)

    def test_fidelity_eval_Should_RaiseValueError_When_ArgumentIsMissing(self):
        r = np.zeros((2, 1))

        with self.assertRaises(ValueError):
            fidelity_eval(r, FidelityKind.IDIV)

        with self.assertRaises(ValueError):
            fidelity_eval(r, FidelityKind.WEIGHTED_L2)


class TestWrfcmFit(TestCase):

    def test_sub_updates_Should_NotIncreaseObjective(self):
        m = 2.0
        nbhd = build_neighborhood(32, 32, 1)

        for seed in range(20):
            clean, _ = gen_synthetic(SyntheticSpec(32, 32, geometry=Geometry(seed % 3)))
            noise = NoiseSpec(poisson=seed % 2 == 0, sigma=10.0 + 5.0 * (seed % 5), impulse_p=0.05 * (seed % 5),
                              impulse_kind=ImpulseKind(seed % 2), seed=seed)
            image = corrupt(clean, noise)
            beta = betas_from_phi(5.0 + seed % 6, channel_stddev(image, relative=True))

            v = initial_prototypes(image, 4, np.random.default_rng(100 + seed))
            u = np.full((4, image.size), 0.25)
            r = np.zeros_like(image.data)
            w = np.ones_like(image.data)

            for t in range(8):
                before = objective(image, u, v, r, w, nbhd, beta, m)
                u = update_membership(image, v, r, nbhd, m)
                after_u = objective(image, u, v, r, w, nbhd, beta, m)
                v = update_prototypes(image, u, r, nbhd, m)
                after_v = objective(image, u, v, r, w, nbhd, beta, m)
                r = update_residual(image, u, v, w, nbhd, beta, m)
                after_r = objective(image, u, v, r, w, nbhd, beta, m)

                with self.subTest(seed=seed, t=t):
                    self.assertLessEqual(after_u, before * (1 + 1e-8))
                    self.assertLessEqual(after_v, after_u * (1 + 1e-8))
                    self.assertLessEqual(after_r, after_v * (1 + 1e-8))

                w = update_weights(r, 0.0008)

    def test_wrfcm_fit_Should_SegmentPerfectly_When_ImageIsNoiseFree(self):
        data = np.zeros((16, 16))
        data[:, 8:] = 255.0
        image = ImageTensor.from_array(data)
        truth = (data.ravel() > 0).astype(int)

        output = wrfcm_fit(image, SolverConfig(c=2))

        self.assertEqual(1.0, report(output.labels, truth, 2).sa)

    def test_wrfcm_fit_Should_KeepResidualZero_When_WindowIsSinglePixel(self):
        data = np.zeros((8, 8))
        data[4:, :] = 200.0
        image = ImageTensor.from_array(data)

        output = wrfcm_fit(image, SolverConfig(c=2, radius=0))

        self.assertLess(np.max(np.abs(output.r)), 1e-9)
        np.testing.assert_array_equal(np.ones_like(output.w), output.w)
        self.assertTrue(output.trace.converged)

    def test_wrfcm_fit_Should_ReduceToSpatialFcm_When_FidelityIsHuge(self):
        clean, _ = gen_synthetic(SyntheticSpec(16, 12))
        image = corrupt(clean, NoiseSpec(sigma=10.0, seed=21))
        config = SolverConfig(c=4, xi=0.0, max_iter=30, seed=5)

        output = wrfcm_fit(image, config, beta=np.array([1e14]))

        nbhd = build_neighborhood(16, 12, 1)
        zero = np.zeros_like(image.data)
        v = initial_prototypes(image, 4, np.random.default_rng(5))
        for _ in range(output.trace.iterations):
            u = update_membership(image, v, zero, nbhd, 2.0)
            v = update_prototypes(image, u, zero, nbhd, 2.0)

        np.testing.assert_allclose(u, output.u, atol=1e-9)
        np.testing.assert_allclose(v, output.v, rtol=1e-9)

    def test_wrfcm_fit_Should_BeDeterministic_When_SeedIsFixed(self):
        clean, _ = gen_synthetic(SyntheticSpec(24, 24))
        image = corrupt(clean, NoiseSpec(sigma=20.0, impulse_p=0.1, seed=1))
        config = SolverConfig(c=4, seed=9)

        first = wrfcm_fit(image, config)
        second = wrfcm_fit(image, config)

        np.testing.assert_array_equal(first.u, second.u)
        np.testing.assert_array_equal(first.r, second.r)
        self.assertEqual(first.trace.objectives, second.trace.objectives)

    def test_wrfcm_fit_Should_DeriveBetaFromRelativeDeviation_When_BetaIsOmitted(self):
        clean, _ = gen_synthetic(SyntheticSpec(16, 16))
        image = corrupt(clean, NoiseSpec(sigma=20.0, impulse_p=0.1, seed=6))
        config = SolverConfig(c=4, phi=6.0, max_iter=15)

        beta = betas_from_phi(6.0, channel_stddev(image, relative=True))
        derived = wrfcm_fit(image, config)
        explicit = wrfcm_fit(image, config, beta=beta)

        np.testing.assert_allclose(beta, 6.0 * np.std(image.data, axis=0) / 255.0, rtol=1e-12)
        np.testing.assert_array_equal(explicit.r, derived.r)
        self.assertEqual(explicit.trace.objectives, derived.trace.objectives)

    def test_wrfcm_fit_Should_OutperformFcm_When_NoiseIsMixed(self):
        clean, truth = gen_synthetic(SyntheticSpec(256, 256))
        image = corrupt(clean, NoiseSpec(poisson=True, sigma=30.0, impulse_p=0.2, seed=0))

        accuracies = []
        for phi in (5.0, 7.5, 10.0):
            start = time.perf_counter()
            output = wrfcm_fit(image, SolverConfig(c=4, phi=phi))
            elapsed = time.perf_counter() - start

            self.assertLess(elapsed, 30.0)
            self.assertLess(output.trace.objectives[-1], output.trace.objectives[0])
            accuracies.append(report(output.labels, truth, 4).sa)

        u, v, _ = fcm_fit(image, SolverConfig(c=4))
        fcm_accuracy = report(np.argmax(u, axis=0), truth, 4).sa

        self.assertGreaterEqual(max(accuracies), 0.99)
        self.assertLessEqual(fcm_accuracy, max(accuracies) - 0.05)

    def test_wrfcm_fit_Should_ConvergeWithin200Iterations_When_NoiseIsMixed(self):
        clean, truth = gen_synthetic(SyntheticSpec(256, 256))
        image = corrupt(clean, NoiseSpec(poisson=True, sigma=30.0, impulse_p=0.2, seed=0))

        output = wrfcm_fit(image, SolverConfig(c=4, phi=5.0, eps=1e-6, max_iter=200))

        trace = output.trace
        self.assertTrue(trace.converged)
        self.assertLessEqual(trace.iterations, 200)
        self.assertLess(trace.thetas[-1], 1e-6)
        self.assertEqual(trace.iterations, len(trace.objectives))
        self.assertLess(trace.objectives[-1], trace.objectives[0])
        self.assertGreaterEqual(report(output.labels, truth, 4).sa, 0.99)

    def test_wrfcm_fit_Should_RecordConvergence(self):
        clean, _ = gen_synthetic(SyntheticSpec(32, 32, levels=(20.0, 120.0, 220.0)))
        image = corrupt(clean, NoiseSpec(sigma=10.0, seed=2))

        output = wrfcm_fit(image, SolverConfig(c=3, max_iter=500))

        trace = output.trace
        self.assertTrue(trace.converged)
        self.assertLess(trace.thetas[-1], 1e-6)
        self.assertLess(trace.objectives[-1], trace.objectives[0])
        self.assertEqual((image.size,), output.labels.shape)
        self.assertEqual(image.data.shape, output.segmented.data.shape)
