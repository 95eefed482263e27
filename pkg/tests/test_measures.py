import numpy as np
import pytest

from salgp import (
    DiagGaussian,
    DimensionMismatchError,
    DiracPoint,
    ProductMeasure,
    UniformBox,
    WeightedSum,
    discrete_time_window,
    indicator_box,
    mass,
    power,
    product_time_space,
)


class TestMass:
    def test_unit_box(self):
        assert mass(UniformBox([0.0], [1.0], scale=1.0)) == 1.0

    def test_scaled_gaussian(self):
        assert mass(DiagGaussian([0.0], [1.0], scale=3.0)) == 3.0

    def test_weighted_sum_linearity(self):
        a = UniformBox([0.0], [1.0])
        b = UniformBox([-1.0], [2.0])
        assert mass(WeightedSum([(2.0, a), (-0.5, b)])) == pytest.approx(1.5, abs=1e-15)

    def test_indicator_mass_is_volume(self):
        assert mass(indicator_box([0.0, 0.0], [2.0, 3.0])) == 6.0

    def test_dirac(self):
        assert mass(DiracPoint([1.0, 2.0], scale=0.5)) == 0.5


class TestProduct:
    def test_window_times_unit_box(self):
        window = indicator_box([0.0], [10.0])
        space = indicator_box([0.0, 0.0], [1.0, 1.0])
        prod = product_time_space(window, space)
        assert prod.dim == 3
        assert mass(prod) == pytest.approx(10.0, abs=1e-12)
        assert prod.time_part is window
        assert prod.space_part is space

    def test_discrete_window_mass(self):
        window = discrete_time_window(0.0, 10)  # 11 unit atoms
        prod = product_time_space(window, indicator_box([0.0, 0.0], [1.0, 1.0]))
        assert mass(prod) == pytest.approx(11.0, abs=1e-12)

    def test_zero_width_window_is_dirac(self):
        window = discrete_time_window(3.0, 0)
        assert isinstance(window, DiracPoint)
        assert window.point[0] == 3.0

    def test_time_must_be_one_dimensional(self):
        with pytest.raises(DimensionMismatchError):
            product_time_space(indicator_box([0, 0], [1, 1]), indicator_box([0], [1]))

    def test_power(self):
        base = UniformBox([0.0, 0.0], [1.0, 2.0], scale=2.0)
        cubed = power(base, 3)
        assert cubed.dim == 6
        assert mass(cubed) == pytest.approx(8.0, abs=1e-12)
        assert power(base, 1) is base


class TestValidation:
    def test_box_needs_increasing_bounds(self):
        with pytest.raises(ValueError):
            UniformBox([1.0], [1.0])

    def test_gaussian_needs_positive_stds(self):
        with pytest.raises(ValueError):
            DiagGaussian([0.0], [0.0])

    def test_weighted_sum_dimension_check(self):
        with pytest.raises(DimensionMismatchError):
            WeightedSum([(1.0, UniformBox([0], [1])), (1.0, UniformBox([0, 0], [1, 1]))])

    def test_bounds_shape_check(self):
        with pytest.raises(DimensionMismatchError):
            UniformBox([0.0, 0.0], [1.0])


class TestCompilation:
    def test_primitive_terms(self):
        c = UniformBox([0.0, -1.0], [1.0, 1.0], scale=2.0).compiled()
        assert c.coeff.tolist() == [2.0]
        assert c.kind.shape == (1, 2)

    def test_sum_of_products_expands(self):
        window = discrete_time_window(0.0, 2)  # 3 atoms
        space = WeightedSum(
            [(1.0, indicator_box([0, 0], [1, 1])), (-0.5, indicator_box([0, 0], [0.5, 0.5]))]
        )
        compiled = ProductMeasure([window, space]).compiled()
        assert compiled.coeff.size == 6  # 3 atoms x 2 space terms
        assert compiled.dim == 3
        # mass equals sum over terms of coeff times per-term unit masses
        assert compiled.mass == pytest.approx(3 * (1.0 - 0.5 * 0.25), abs=1e-12)
