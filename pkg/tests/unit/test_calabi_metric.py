"""Tests for Calabi's potential, its derivatives, residuals and decay."""

import numpy as np
import pytest
from alekahler.calabi_metric import (
    FAR_FIELD_START,
    STENCIL_EDGE,
    CalabiError,
    PositivityError,
    RadialKahlerPotential,
    _extrapolated_derivatives,
    _far_field_series,
    _log_sum,
    asymptotic_coefficient,
    asymptotic_constant,
    calabi_derivatives,
    calabi_imaginary_residue,
    calabi_offset,
    calabi_potential,
    calabi_remainder,
    calabi_second_derivative,
    metric_decay_profile,
    remainder_decay,
    ricci_flat_residual,
)
from alekahler.radial_field import GridError, RadialFunction, RadialGrid


def eguchi_hanson(t):
    s = np.sqrt(t * t + 1.0)
    return s + 0.5 * np.log((s - 1.0) / (s + 1.0))


class TestPotential:
    """Test the closed-form potential."""

    def test_matches_eguchi_hanson(self):
        t = np.array([0.1, 1.0, 1.9, 3.0, 10.0])
        np.testing.assert_allclose(calabi_potential(2, t), eguchi_hanson(t), rtol=1e-12)

    def test_offset_leading_term(self):
        t = 1e4
        assert calabi_offset(2, t) * t == pytest.approx(-0.5, rel=1e-8)

    def test_class_scaling(self):
        t = np.geomspace(1e-2, 1e3, 7)
        np.testing.assert_allclose(
            calabi_potential(3, t, 8.0), 2.0 * calabi_potential(3, t / 2.0), rtol=1e-13
        )

    def test_zero_class_is_flat(self):
        t = np.array([0.5, 2.0])
        np.testing.assert_array_equal(calabi_potential(3, t, 0.0), t)

    @pytest.mark.parametrize("m", [3, 4, 5])
    def test_imaginary_residue_small(self, m):
        assert calabi_imaginary_residue(m, np.geomspace(1e-4, 1e2, 200)) < 1e-12

    def test_rejects_nonpositive_t(self):
        with pytest.raises(CalabiError, match="t > 0"):
            calabi_potential(2, np.array([0.0, 1.0]))

    def test_rejects_bad_dimension(self):
        with pytest.raises(CalabiError):
            calabi_potential(1, 1.0)

    def test_rejects_negative_class(self):
        with pytest.raises(CalabiError):
            calabi_offset(2, 1.0, -1.0)

    def test_offset_continuous_at_branch(self):
        below = calabi_offset(3, FAR_FIELD_START * (1 - 1e-12))
        above = calabi_offset(3, FAR_FIELD_START * (1 + 1e-12))
        assert below == pytest.approx(above, rel=1e-9)

    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_series_matches_log_sum(self, m):
        u = np.geomspace(FAR_FIELD_START, 50.0, 25)
        near = _log_sum(m, u).real - u
        np.testing.assert_allclose(_far_field_series(m, u, 1), near, rtol=1e-9, atol=1e-12)


class TestDerivatives:
    """Test closed-form derivatives against finite differences."""

    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_first_derivative(self, m):
        t = np.array([0.5, 1.0, 2.0, 5.0])
        e = 1e-5
        numeric = (calabi_potential(m, t + e) - calabi_potential(m, t - e)) / (2 * e)
        np.testing.assert_allclose(calabi_derivatives(m, t)[0], numeric, rtol=1e-8)

    @pytest.mark.parametrize("m", [2, 3])
    def test_radial_eigenvalue(self, m):
        t = np.geomspace(0.5, 1e2, 9)
        transverse, radial = calabi_derivatives(m, t, 2.0)
        np.testing.assert_allclose(
            radial, transverse + t * calabi_second_derivative(m, t, 2.0), rtol=1e-10
        )


class TestRicciFlat:
    """Test the Ricci-flat residual."""

    @pytest.mark.parametrize("m", [2, 3, 4, 5])
    def test_closed_form(self, m):
        grid = RadialGrid.log_t(1e-4, 1e8, 2000)
        assert ricci_flat_residual(m, grid) < 1e-13

    @pytest.mark.parametrize("m", [2, 3, 4, 5])
    def test_finite_difference(self, m):
        grid = RadialGrid.log_t(1e-4, 1e8, 2000)
        assert ricci_flat_residual(m, grid, method="finite_difference") < 1e-8

    def test_finite_difference_other_class(self):
        grid = RadialGrid.log_t(1e-4, 1e8, 2000)
        assert ricci_flat_residual(3, grid, method="finite_difference", class_constant=2.0) < 1e-8

    def test_finite_difference_needs_nodes(self):
        with pytest.raises(GridError, match="extrapolated stencils"):
            ricci_flat_residual(2, RadialGrid.log_t(1.0, 10.0, 12), method="finite_difference")

    def test_extrapolated_stencils_are_sixth_order(self):
        grid = RadialGrid.log_t(1.0, np.exp(20.0), 401)
        first, second = _extrapolated_derivatives(np.sin(grid.x), grid.h)
        inner = slice(STENCIL_EDGE, -STENCIL_EDGE)
        # a fourth-order stencil alone is off by about h^4 / 90 = 7e-8 here
        np.testing.assert_allclose(first[inner], np.cos(grid.x)[inner], atol=1e-9)
        np.testing.assert_allclose(second[inner], -np.sin(grid.x)[inner], atol=1e-9)

    def test_needs_log_t_grid(self):
        with pytest.raises(GridError):
            ricci_flat_residual(2, RadialGrid.log_r(1.0, 10.0, 32))

    def test_unknown_method(self):
        with pytest.raises(CalabiError, match="unknown method"):
            ricci_flat_residual(2, RadialGrid.log_t(1.0, 10.0, 32), method="spectral")

    def test_volume_density_is_one(self):
        grid = RadialGrid.log_t(1e-3, 1e3, 64)
        np.testing.assert_allclose(
            RadialKahlerPotential.calabi(3, grid).volume_density(), 1.0, rtol=1e-13
        )


class TestAsymptotics:
    """Test the fitted coefficient and decay orders."""

    @pytest.mark.parametrize("m", [2, 3, 4, 5])
    def test_coefficient(self, m):
        assert asymptotic_coefficient(m) == pytest.approx(asymptotic_constant(m), rel=1e-7)

    def test_coefficient_scales_with_class(self):
        assert asymptotic_constant(2, 4.0) == -2.0
        assert asymptotic_coefficient(2, class_constant=4.0) == pytest.approx(-2.0, rel=1e-7)

    def test_narrow_window_rejected(self):
        with pytest.raises(CalabiError, match="too small"):
            asymptotic_coefficient(2, fit_window=(1e4, 2e4))

    @pytest.mark.parametrize("m", [2, 3])
    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_metric_decay(self, m, k):
        assert metric_decay_profile(m, k) == pytest.approx(-2 * m - k, abs=1e-3)

    def test_remainder_leading_term(self):
        t = np.array([1e2, 1e3])
        np.testing.assert_allclose(calabi_remainder(2, t), t**-3.0 / 24.0, rtol=1e-3)

    def test_remainder_continuous_at_branch(self):
        below = calabi_remainder(2, FAR_FIELD_START * (1 - 1e-12))
        above = calabi_remainder(2, FAR_FIELD_START * (1 + 1e-12))
        assert below == pytest.approx(above, rel=1e-9)

    @pytest.mark.parametrize("k", [0, 1])
    def test_remainder_decay(self, k):
        assert remainder_decay(2, k) == pytest.approx(2 - 8 - k, abs=1e-2)

    def test_decay_order_range(self):
        with pytest.raises(CalabiError):
            metric_decay_profile(2, 3)


class TestRadialKahlerPotential:
    """Test eigenvalues and the positivity guard."""

    def test_flat(self):
        grid = RadialGrid.log_t(1e-2, 1e2, 32)
        flat = RadialKahlerPotential.flat(3, grid)
        np.testing.assert_array_equal(flat.volume_density(), np.ones(32))
        assert flat.positivity_margin() == 1.0

    def test_sampled_eigenvalues(self):
        grid = RadialGrid.log_t(1e-2, 1e2, 2001)
        potential = RadialKahlerPotential(2, RadialFunction(grid, grid.t + grid.t**2))
        np.testing.assert_allclose(potential.transverse_eigenvalue(), 1 + 2 * grid.t, rtol=1e-6)
        np.testing.assert_allclose(potential.radial_eigenvalue(), 1 + 4 * grid.t, rtol=1e-6)

    def test_requires_log_t_grid(self):
        grid = RadialGrid.log_r(1.0, 10.0, 32)
        with pytest.raises(GridError):
            RadialKahlerPotential(2, RadialFunction(grid, grid.t))

    def test_positivity_error_location(self):
        grid = RadialGrid.log_t(1.0, 10.0, 16)
        potential = RadialKahlerPotential(
            2,
            RadialFunction(grid, grid.t),
            eigenvalues=lambda t: (np.ones_like(t), np.where(t > 5.0, -1.0, 1.0)),
        )
        with pytest.raises(PositivityError) as excinfo:
            potential.check_positive()
        node = int(np.flatnonzero(grid.t > 5.0)[0])
        assert excinfo.value.node == node
        assert excinfo.value.t == pytest.approx(grid.t[node])
