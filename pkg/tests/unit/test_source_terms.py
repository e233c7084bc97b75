"""Tests for named and tabulated right-hand sides."""

import numpy as np
import pytest
from alekahler.flat_laplacian import laplacian, total_moment
from alekahler.radial_field import RadialFunction, RadialGrid
from alekahler.source_terms import (
    SourceError,
    build_source,
    closed_form_coefficient,
    closed_form_solution,
    load_csv_source,
    parse_source,
)


class TestParseSource:
    """Test source specifications."""

    def test_name_and_parameters(self):
        assert parse_source("inverse_quadratic_power 3 8") == ("inverse_quadratic_power", [3.0, 8.0])

    def test_no_parameters(self):
        assert parse_source("delta_rho_power") == ("delta_rho_power", [])

    def test_empty(self):
        with pytest.raises(SourceError, match="empty"):
            parse_source("   ")

    def test_unknown_name(self):
        with pytest.raises(SourceError, match="unknown source"):
            parse_source("gaussian 1")

    def test_non_numeric(self):
        with pytest.raises(SourceError, match="non-numeric"):
            parse_source("compact_bump wide")


class TestBuildSource:
    """Test evaluation of named sources."""

    def test_default_weight(self):
        grid = RadialGrid.log_r(1e-2, 1e2, 64)
        f, beta = build_source("inverse_quadratic_power 3 8", grid, 4)
        assert beta == -6.0
        np.testing.assert_allclose(f.values, 8.0 * (1 + grid.r**2) ** -3.0)

    def test_weight_override(self):
        grid = RadialGrid.log_r(1e-2, 1e2, 64)
        _, beta = build_source("compact_bump 2", grid, 4, beta=-10.0)
        assert beta == -10.0

    def test_bump_support(self):
        grid = RadialGrid.log_r(1e-3, 10.0, 200)
        f, beta = build_source("compact_bump 2 3", grid, 4)
        assert beta == -5.0
        assert f.values[0] == pytest.approx(3.0, rel=1e-5)
        assert not np.any(f.values[grid.r >= 2.0])

    def test_bump_radius_positive(self):
        grid = RadialGrid.log_r(1e-2, 1e2, 64)
        with pytest.raises(SourceError, match="radius"):
            build_source("compact_bump 0", grid, 4)

    def test_wrong_parameter_count(self):
        grid = RadialGrid.log_r(1e-2, 1e2, 64)
        with pytest.raises(SourceError, match="wrong number"):
            build_source("delta_rho_power 1", grid, 4)

    @pytest.mark.parametrize("n", [4, 6])
    def test_delta_rho_power_is_laplacian(self, n):
        grid = RadialGrid.log_r(1e-2, 1e2, 401)
        # rho^(2-n) = (1 + r^2)^-q with q = (n-2)/2
        q = (n - 2) / 2.0
        rho_power = RadialFunction.closed_form(
            grid,
            lambda r: (1 + r * r) ** -q,
            {
                1: lambda r: -2 * q * r * (1 + r * r) ** (-q - 1),
                2: lambda r: -2 * q * (1 + r * r) ** (-q - 1)
                + 4 * q * (q + 1) * r * r * (1 + r * r) ** (-q - 2),
            },
        )
        f, beta = build_source("delta_rho_power", grid, n)
        assert beta == -n - 2.0
        np.testing.assert_allclose(laplacian(rho_power, n).values, f.values, rtol=1e-10)

    def test_laplacian_of_bump(self):
        grid = RadialGrid.log_r(0.1, 4.0, 4001)
        f, _ = build_source("laplacian_of_bump 2", grid, 4)
        bump, _ = build_source("compact_bump 2", grid, 4)
        np.testing.assert_allclose(laplacian(bump, 4).values, f.values, rtol=0, atol=1e-5)

    def test_laplacian_of_bump_has_zero_mean(self):
        grid = RadialGrid.log_r(1e-4, 10.0, 4001)
        f, beta = build_source("laplacian_of_bump 2", grid, 4)
        assert abs(total_moment(grid, f.values, 4, beta)) < 1e-8


class TestCsvSource:
    """Test tabulated sources."""

    def test_samples_reproduced(self, source_csv):
        grid = RadialGrid.log_r(1e-2, 1e4, 61)
        f = load_csv_source(source_csv, grid)
        r = grid.r[:-1]
        np.testing.assert_allclose(f.values[:-1], 8.0 * (1 + r * r) ** -3.0, rtol=1e-9)

    def test_zero_beyond_last_sample(self, source_csv):
        grid = RadialGrid.log_r(1e-3, 1e5, 81)
        f = load_csv_source(source_csv, grid)
        assert not np.any(f.values[grid.r > 1.01e4])
        assert f.values[0] == pytest.approx(8.0 * (1 + 1e-4) ** -3.0)

    def test_needs_explicit_weight(self, source_csv):
        grid = RadialGrid.log_r(1e-2, 1e2, 64)
        with pytest.raises(SourceError, match="explicit beta"):
            build_source({"csv": str(source_csv)}, grid, 4)

    def test_with_weight(self, source_csv):
        grid = RadialGrid.log_r(1e-2, 1e2, 64)
        f, beta = build_source({"csv": str(source_csv)}, grid, 4, beta=-6.0)
        assert beta == -6.0
        assert isinstance(f, RadialFunction)

    def test_missing_file(self, tmp_path):
        grid = RadialGrid.log_r(1e-2, 1e2, 64)
        with pytest.raises(SourceError, match="not found"):
            load_csv_source(tmp_path / "missing.csv", grid)

    def test_decreasing_radii(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("r,f\n2,1\n1,1\n")
        with pytest.raises(SourceError, match="increasing"):
            load_csv_source(path, RadialGrid.log_r(1e-2, 1e2, 64))

    def test_missing_csv_key(self):
        with pytest.raises(SourceError):
            build_source({"path": "x.csv"}, RadialGrid.log_r(1e-2, 1e2, 64), 4, beta=-6.0)


class TestClosedForms:
    """Test exact coefficients and solutions."""

    def test_coefficient_dimension_four(self):
        assert closed_form_coefficient("inverse_quadratic_power 3 8", 4) == pytest.approx(1.0)

    def test_coefficient_dimension_six(self):
        assert closed_form_coefficient("inverse_quadratic_power 4 24", 6) == pytest.approx(1.0)

    def test_slow_decay_has_zero_coefficient(self):
        assert closed_form_coefficient("inverse_quadratic_power 1.5", 4) == 0.0

    def test_borderline_has_none(self):
        assert closed_form_coefficient("inverse_quadratic_power 2", 4) is None

    def test_other_sources(self):
        assert closed_form_coefficient("laplacian_of_bump 2", 4) == 0.0
        assert closed_form_coefficient("delta_rho_power", 6) == 1.0
        assert closed_form_coefficient("compact_bump 2", 4) is None
        assert closed_form_coefficient({"csv": "x.csv"}, 4) is None

    def test_solution(self):
        u = closed_form_solution("inverse_quadratic_power 3 8", 4)
        assert u(np.array(1.0)) == pytest.approx(0.5)
        assert closed_form_solution("inverse_quadratic_power 1.5", 4) is None
        assert closed_form_solution("delta_rho_power", 6)(np.array(1.0)) == pytest.approx(0.25)
