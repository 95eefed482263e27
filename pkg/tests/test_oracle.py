import numpy as np
import pytest

from salgp import (
    AdaptiveSimpson,
    DiagGaussian,
    DiracPoint,
    GaussHermite,
    GaussLegendre,
    GpModel,
    Imspe,
    MarginalKernel,
    ProductMeasure,
    ResourceLimitError,
    SeArdKernel,
    UniformBox,
    WeightedSum,
    build_workspace,
    imspe_bruteforce,
    integrate,
)

from conftest import random_kernel, random_model


class TestIntegrate:
    def test_mass_of_probability_measures(self):
        one = lambda pts: np.ones(pts.shape[0])
        assert integrate(GaussLegendre(8), UniformBox([0, 0], [1, 2]), one, True) == (
            pytest.approx(1.0, abs=1e-12)
        )
        assert integrate(GaussHermite(8), DiagGaussian([0.0], [2.0]), one, True) == (
            pytest.approx(1.0, abs=1e-12)
        )

    def test_second_moment_standard_gaussian(self):
        val = integrate(
            GaussHermite(40), DiagGaussian([0.0], [1.0]), lambda p: p[..., 0] ** 2, True
        )
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_scalar_function_interface(self):
        val = integrate(GaussLegendre(16), UniformBox([0.0], [1.0]), lambda x: x[0] ** 2)
        assert val == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_weighted_sum_linearity(self):
        f = lambda pts: pts[..., 0] + 1.0
        a = UniformBox([0.0], [1.0])
        b = UniformBox([1.0], [3.0])
        combo = WeightedSum([(2.0, a), (-1.0, b)])
        rule = GaussLegendre(12)
        expected = 2.0 * integrate(rule, a, f, True) - integrate(rule, b, f, True)
        assert integrate(rule, combo, f, True) == pytest.approx(expected, abs=1e-12)

    def test_dirac_product(self):
        mu = ProductMeasure([DiracPoint([2.0]), UniformBox([0.0], [1.0])])
        val = integrate(
            GaussLegendre(12), mu, lambda pts: pts[..., 0] * pts[..., 1], True
        )
        assert val == pytest.approx(2.0 * 0.5, abs=1e-12)

    def test_incompatible_rule_raises(self):
        with pytest.raises(ValueError):
            integrate(GaussLegendre(8), DiagGaussian([0.0], [1.0]), lambda p: 1.0)
        with pytest.raises(ValueError):
            integrate(GaussHermite(8), UniformBox([0.0], [1.0]), lambda p: 1.0)

    def test_node_guard(self):
        big = UniformBox(np.zeros(6), np.ones(6))
        with pytest.raises(ResourceLimitError):
            integrate(GaussLegendre(60), big, lambda p: 1.0, True)

    def test_minimum_nodes(self):
        with pytest.raises(ValueError):
            GaussLegendre(1)

    def test_adaptive_simpson_matches_legendre(self):
        mu = UniformBox([-1.0, 0.0], [1.0, 2.0])
        f = lambda pts: np.exp(-np.sum(pts * pts, axis=-1))
        a = integrate(AdaptiveSimpson(1e-11), mu, f, True)
        b = integrate(GaussLegendre(48), mu, f, True)
        assert a == pytest.approx(b, rel=1e-9)

    def test_adaptive_simpson_rejects_gaussian(self):
        with pytest.raises(ValueError):
            integrate(AdaptiveSimpson(1e-8), DiagGaussian([0.0], [1.0]), lambda p: 1.0)

    def test_node_count_convergence(self, rng):
        # doubling the nodes changes smooth SE integrals by < 1e-8
        k = random_kernel(rng, 2)
        mu = UniformBox([-2.5, -2.0], [2.0, 2.5])
        x1 = rng.uniform(-1, 1, size=2)
        x2 = rng.uniform(-1, 1, size=2)

        def product(pts):
            z1 = (pts - x1) / k.lengthscales
            z2 = (pts - x2) / k.lengthscales
            return np.exp(-0.5 * np.sum(z1 * z1, -1) - 0.5 * np.sum(z2 * z2, -1))

        coarse = integrate(GaussLegendre(40), mu, product, True)
        fine = integrate(GaussLegendre(80), mu, product, True)
        assert abs(fine - coarse) < 1e-8


class TestBruteforce:
    def test_empty_model_two_routes(self, rng):
        model = random_model(rng, 0, 2, noise=0.0)
        mu = DiagGaussian([0.0, 0.0], [1.0, 1.0])
        cand = rng.uniform(-1, 1, size=2)
        brute = imspe_bruteforce(model, mu, cand, GaussHermite(40))
        closed = build_workspace(model, Imspe(mu)).evaluate(cand)
        assert brute == pytest.approx(closed, rel=1e-8)

    def test_motivating_configuration(self):
        model = GpModel(SeArdKernel([1.0]), 0.0, [[1.0]], [0.0]).fit_cholesky()
        mu = DiagGaussian([0.0], [1.0])
        ws = build_workspace(model, Imspe(mu))
        cand = np.array([0.0])
        brute = imspe_bruteforce(model, mu, cand, GaussHermite(60))
        assert ws.evaluate(cand) == pytest.approx(brute, rel=1e-6)

    def test_variance_reduction_bound(self, rng):
        model = random_model(rng, 4, 2, noise=0.1)
        mu = UniformBox([-2, -2], [2, 2], scale=1.0)
        ws = build_workspace(model, Imspe(mu))
        prior_level = ws.integrated_prior_variance()
        for _ in range(5):
            cand = rng.uniform(-2, 2, size=2)
            val = imspe_bruteforce(model, mu, cand, GaussLegendre(40))
            assert val <= prior_level + 1e-9
