import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salgp import (
    DiagGaussian,
    DimensionMismatchError,
    DiracPoint,
    GaussHermite,
    GaussLegendre,
    MarginalKernel,
    SeArdKernel,
    UniformBox,
    UnsupportedMarginalError,
    WeightedSum,
    integrate,
)

from conftest import random_kernel


def quadrature_reference(kernel, mu, x1, x2, rule):
    """Independent route: integrate the kernel product numerically."""

    def product(pts):
        z1 = (pts - x1) / kernel.lengthscales
        z2 = (pts - x2) / kernel.lengthscales
        return kernel.signal_variance**2 * np.exp(
            -0.5 * np.sum(z1 * z1, axis=-1) - 0.5 * np.sum(z2 * z2, axis=-1)
        )

    return integrate(rule, mu, product, vectorized=True)


class TestCrossMarginal:
    def test_near_degenerate_box_mean_value(self):
        # collapses to k(x1,c) * k(c,x2) * mass at the box center
        a = 0.4
        b = a + 1e-15
        c = 0.5 * (a + b)
        k = SeArdKernel([0.9], signal_std=1.2)
        mk = MarginalKernel(k, UniformBox([a], [b], scale=1.0))
        x1, x2 = np.array([0.1]), np.array([-0.7])
        expected = k(x1, [c]) * k([c], x2) * 1.0
        assert mk.cross_marginal(x1, x2) == pytest.approx(expected, abs=1e-12)

    def test_gaussian_dirac_limit(self):
        m = np.array([0.3, -0.4])
        k = SeArdKernel([1.0, 1.3], signal_std=1.1)
        mk = MarginalKernel(k, DiagGaussian(m, [1e-9, 1e-9], scale=1.0))
        x1 = np.array([0.5, 0.2])
        x2 = np.array([-0.2, 0.9])
        expected = k(x1, m) * k(m, x2)
        assert mk.cross_marginal(x1, x2) == pytest.approx(expected, abs=1e-6)

    def test_matches_hermite_oracle_2d(self):
        rng = np.random.default_rng(3)
        k = SeArdKernel([1.0, 1.5], signal_std=1.3)
        mu = DiagGaussian([0.2, -0.1], [0.8, 1.1])
        mk = MarginalKernel(k, mu)
        for _ in range(5):
            x1 = rng.uniform(-2, 2, size=2)
            x2 = rng.uniform(-2, 2, size=2)
            ref = quadrature_reference(k, mu, x1, x2, GaussHermite(60))
            assert mk.cross_marginal(x1, x2) == pytest.approx(ref, rel=1e-8)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            MarginalKernel(SeArdKernel([1.0]), UniformBox([0, 0], [1, 1]))

    def test_unsupported_kernel_rejected(self):
        class OtherKernel:
            dim = 1

        with pytest.raises(UnsupportedMarginalError):
            MarginalKernel(OtherKernel(), UniformBox([0], [1]))

    def test_unsupported_measure_rejected(self):
        with pytest.raises(UnsupportedMarginalError):
            MarginalKernel(SeArdKernel([1.0]), object())


class TestSingleMarginal:
    def test_equals_cross_marginal_bitwise(self, rng):
        k = random_kernel(rng, 3)
        mk = MarginalKernel(
            k, UniformBox(rng.uniform(-3, -1, 3), rng.uniform(1, 3, 3), scale=1.4)
        )
        for _ in range(10):
            x = rng.uniform(-2, 2, size=3)
            assert mk.single_marginal(x) == mk.cross_marginal(x, x)

    def test_standard_gaussian_value(self):
        # unit kernel, standard Gaussian weight, at the origin: 1/sqrt(3)
        mk = MarginalKernel(SeArdKernel([1.0]), DiagGaussian([0.0], [1.0]))
        assert mk.single_marginal([0.0]) == pytest.approx(1.0 / np.sqrt(3.0), abs=1e-14)

    def test_wide_uniform_matches_legendre_oracle(self):
        k = SeArdKernel([1.0])
        mu = UniformBox([-10.0], [10.0], scale=1.0)  # density 1/20
        mk = MarginalKernel(k, mu)
        ref = quadrature_reference(k, mu, np.zeros(1), np.zeros(1), GaussLegendre(120))
        assert mk.single_marginal([0.0]) == pytest.approx(ref, rel=1e-8)


class TestDataMarginalMatrix:
    def test_empty(self, rng):
        mk = MarginalKernel(random_kernel(rng, 2), DiagGaussian([0, 0], [1, 1]))
        assert mk.data_marginal_matrix(np.zeros((0, 2))).shape == (0, 0)

    def test_single_point_equals_single_marginal(self, rng):
        mk = MarginalKernel(random_kernel(rng, 2), DiagGaussian([0, 0], [1, 1]))
        x = rng.normal(size=(1, 2))
        M = mk.data_marginal_matrix(x)
        assert M[0, 0] == mk.single_marginal(x[0])

    def test_entries_equal_cross_marginal_exactly(self, rng):
        mk = MarginalKernel(
            random_kernel(rng, 2),
            WeightedSum(
                [
                    (1.0, UniformBox([-2, -2], [2, 2], scale=1.0)),
                    (0.5, DiagGaussian([0, 0.5], [1, 0.7])),
                ]
            ),
        )
        X = rng.normal(size=(5, 2))
        M = mk.data_marginal_matrix(X)
        for i in range(5):
            for j in range(5):
                assert M[i, j] == mk.cross_marginal(X[i], X[j])
        assert np.array_equal(M, M.T)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000), d=st.integers(1, 3))
def test_symmetry_property(seed, d):
    rng = np.random.default_rng(seed)
    k = random_kernel(rng, d)
    mu = DiagGaussian(rng.uniform(-1, 1, d), rng.uniform(0.4, 1.2, d))
    mk = MarginalKernel(k, mu)
    x1 = rng.uniform(-2, 2, size=d)
    x2 = rng.uniform(-2, 2, size=d)
    assert mk.cross_marginal(x1, x2) == pytest.approx(
        mk.cross_marginal(x2, x1), abs=1e-12
    )


def test_measure_linearity_exact(rng):
    k = random_kernel(rng, 2)
    a = UniformBox([-1, -1], [1, 1], scale=1.0)
    b = DiagGaussian([0.2, 0.1], [0.8, 0.9])
    combined = MarginalKernel(k, WeightedSum([(2.0, a), (-0.5, b)]))
    part_a = MarginalKernel(k, a)
    part_b = MarginalKernel(k, b)
    for _ in range(10):
        x1 = rng.uniform(-2, 2, size=2)
        x2 = rng.uniform(-2, 2, size=2)
        direct = combined.cross_marginal(x1, x2)
        linear = 2.0 * part_a.cross_marginal(x1, x2) - 0.5 * part_b.cross_marginal(x1, x2)
        assert direct == pytest.approx(linear, abs=1e-15, rel=1e-14)


def test_translation_covariance(rng):
    k = random_kernel(rng, 2)
    shift = rng.uniform(-3, 3, size=2)
    lo, hi = np.array([-1.0, -0.5]), np.array([1.0, 2.0])
    x1 = rng.uniform(-2, 2, size=2)
    x2 = rng.uniform(-2, 2, size=2)
    base = MarginalKernel(k, UniformBox(lo, hi)).cross_marginal(x1, x2)
    moved = MarginalKernel(k, UniformBox(lo + shift, hi + shift)).cross_marginal(
        x1 + shift, x2 + shift
    )
    assert moved == pytest.approx(base, abs=1e-10, rel=1e-10)
    g = DiagGaussian([0.1, -0.2], [0.7, 1.2])
    base_g = MarginalKernel(k, g).cross_marginal(x1, x2)
    moved_g = MarginalKernel(
        k, DiagGaussian(np.array([0.1, -0.2]) + shift, [0.7, 1.2])
    ).cross_marginal(x1 + shift, x2 + shift)
    assert moved_g == pytest.approx(base_g, abs=1e-10, rel=1e-10)


def test_dimension_factorization(rng):
    # d-dimensional value equals the product of its 1-d factors
    d = 3
    ls = rng.uniform(0.5, 1.5, size=d)
    sf = 1.3
    k = SeArdKernel(ls, signal_std=sf)
    lo = rng.uniform(-2, -1, size=d)
    hi = rng.uniform(1, 2, size=d)
    mk = MarginalKernel(k, UniformBox(lo, hi))
    x1 = rng.uniform(-1, 1, size=d)
    x2 = rng.uniform(-1, 1, size=d)
    joint = mk.cross_marginal(x1, x2)
    product = 1.0
    for h in range(d):
        k1 = SeArdKernel([ls[h]], signal_std=1.0)
        mk1 = MarginalKernel(k1, UniformBox([lo[h]], [hi[h]]))
        product *= mk1.cross_marginal([x1[h]], [x2[h]])
    product *= sf**4
    assert joint == pytest.approx(product, rel=1e-12)


def test_nonnegative_for_nonnegative_measures(rng):
    k = random_kernel(rng, 2)
    mk = MarginalKernel(k, UniformBox([-2, -2], [2, 2], scale=2.0))
    for _ in range(20):
        x1 = rng.uniform(-4, 4, size=2)
        x2 = rng.uniform(-4, 4, size=2)
        assert mk.cross_marginal(x1, x2) >= 0.0


def test_dirac_component_value(rng):
    k = random_kernel(rng, 2)
    z = rng.uniform(-1, 1, size=2)
    mk = MarginalKernel(k, DiracPoint(z, scale=0.7))
    x1 = rng.uniform(-2, 2, size=2)
    x2 = rng.uniform(-2, 2, size=2)
    assert mk.cross_marginal(x1, x2) == pytest.approx(
        0.7 * k(x1, z) * k(z, x2), rel=1e-13
    )
