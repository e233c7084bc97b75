"""Tests for job configuration parsing and defaults."""

import json

import pytest
from alekahler.config import (
    DEFAULT_GRIDS,
    DEFAULT_TOLERANCES,
    FALLBACK_OUTPUT,
    OUTPUT_ENV,
    ConfigError,
    JobConfig,
    default_output_directory,
    load_jobs,
    validate_config,
)


class TestValidateConfig:
    """Test the job validator."""

    def test_minimal_job(self):
        assert validate_config({"command": "calabi", "parameters": {"m": 2}}) == (True, "valid")

    def test_not_an_object(self):
        ok, message = validate_config(["calabi"])
        assert not ok
        assert "JSON object" in message

    def test_unknown_top_level_key(self):
        ok, message = validate_config({"command": "calabi", "parameters": {"m": 2}, "seed": 1})
        assert not ok
        assert "seed" in message

    def test_unknown_command(self):
        ok, message = validate_config({"command": "ricci"})
        assert not ok
        assert "unknown command" in message

    def test_missing_parameters(self):
        ok, message = validate_config({"command": "poisson", "parameters": {"n": 4}})
        assert not ok
        assert "source" in message

    def test_unknown_source(self):
        ok, message = validate_config(
            {"command": "poisson", "parameters": {"n": 4, "source": "gaussian 1"}}
        )
        assert not ok
        assert "unknown source" in message

    def test_csv_source(self):
        raw = {"command": "norms", "parameters": {"source": {"csv": "f.csv"}, "beta": -6}}
        assert validate_config(raw) == (True, "valid")

    def test_bad_source_object(self):
        ok, _ = validate_config({"command": "norms", "parameters": {"source": {"path": "f.csv"}}})
        assert not ok

    def test_partial_grid_uses_defaults(self):
        raw = {"command": "calabi", "parameters": {"m": 2}, "grid": {"n_points": 500}}
        assert validate_config(raw) == (True, "valid")

    def test_grid_range(self):
        raw = {"command": "calabi", "parameters": {"m": 2}, "grid": {"t_min": 10.0, "t_max": 1.0}}
        ok, message = validate_config(raw)
        assert not ok
        assert "t_min < t_max" in message

    def test_grid_too_coarse(self):
        raw = {"command": "calabi", "parameters": {"m": 2}, "grid": {"n_points": 8}}
        ok, message = validate_config(raw)
        assert not ok
        assert "n_points" in message

    def test_quotient_grid_needs_all_keys(self):
        ok, _ = validate_config({"command": "quotient", "grid": {"n_points": 100}})
        assert not ok

    def test_negative_tolerance(self):
        raw = {"command": "calabi", "parameters": {"m": 2}, "tolerances": {"fit": -1.0}}
        ok, message = validate_config(raw)
        assert not ok
        assert "positive" in message

    def test_unknown_tolerance(self):
        raw = {"command": "calabi", "parameters": {"m": 2}, "tolerances": {"decay": 0.1}}
        ok, _ = validate_config(raw)
        assert not ok

    def test_bad_format(self):
        raw = {"command": "calabi", "parameters": {"m": 2}, "output": {"formats": ["hdf5"]}}
        ok, message = validate_config(raw)
        assert not ok
        assert "formats" in message

    def test_empty_name(self):
        ok, _ = validate_config({"command": "quotient", "name": "  "})
        assert not ok

    @pytest.mark.parametrize("name", ["../etc", "a/b", "-flag", "calabi*", "x" * 101, "métrique"])
    def test_name_not_a_stem(self, name):
        ok, message = validate_config({"command": "quotient", "name": name})
        assert not ok
        assert "letters, digits" in message

    @pytest.mark.parametrize("name", ["calabi m2", "check-calabi-m2", "run_3.b", "x" * 100])
    def test_name_usable_as_stem(self, name):
        assert validate_config({"command": "quotient", "name": name}) == (True, "valid")


class TestOutputDirectory:
    """Test the --out / environment / fallback order."""

    def test_cli_value_wins(self, monkeypatch):
        monkeypatch.setenv(OUTPUT_ENV, "from-env")
        assert default_output_directory("from-cli") == "from-cli"

    def test_environment(self, monkeypatch):
        monkeypatch.setenv(OUTPUT_ENV, "from-env")
        assert default_output_directory() == "from-env"

    def test_fallback(self, monkeypatch):
        monkeypatch.delenv(OUTPUT_ENV, raising=False)
        assert default_output_directory() == FALLBACK_OUTPUT


class TestJobConfig:
    """Test completion of defaults and the echo."""

    def test_defaults_filled(self, monkeypatch):
        monkeypatch.delenv(OUTPUT_ENV, raising=False)
        config = JobConfig.from_dict({"command": "calabi", "parameters": {"m": 2}})
        assert config.name == "calabi"
        assert config.grid == DEFAULT_GRIDS["calabi"]
        assert config.tolerances == DEFAULT_TOLERANCES
        assert config.output_directory == FALLBACK_OUTPUT
        assert config.formats == ("json", "csv")

    def test_grid_merge(self):
        config = JobConfig.from_dict(
            {"command": "calabi", "parameters": {"m": 2}, "grid": {"n_points": 500}}
        )
        assert config.grid == {"t_min": 1e-4, "t_max": 1e8, "n_points": 500}

    def test_explicit_directory_wins(self):
        raw = {"command": "quotient", "output": {"directory": "here"}}
        assert JobConfig.from_dict(raw, "elsewhere").output_directory == "here"

    def test_quotient_has_no_grid(self):
        config = JobConfig.from_dict({"command": "quotient"}, "out")
        assert config.grid is None
        assert "grid" not in config.to_dict()
        with pytest.raises(ConfigError, match="no grid"):
            config.build_grid()

    def test_echo_round_trip(self, calabi_job):
        config = load_jobs(calabi_job, "out")[0]
        assert JobConfig.from_dict(config.to_dict()) == config

    def test_invalid_raises(self):
        with pytest.raises(ConfigError, match="needs parameters"):
            JobConfig.from_dict({"command": "pipeline"})

    def test_log_r_grid_spans_same_radii(self):
        config = JobConfig.from_dict(
            {"command": "poisson", "parameters": {"n": 4, "source": "delta_rho_power"}}, "out"
        )
        grid = config.build_grid("log_r")
        assert grid.coordinate == "log_r"
        assert grid.r[0] == pytest.approx(1e-4)
        assert grid.r[-1] == pytest.approx(1e6)
        assert grid.n_points == 8001


class TestLoadJobs:
    """Test reading job files."""

    def test_single_job(self, calabi_job):
        (config,) = load_jobs(calabi_job, "out")
        assert config.name == "calabi m2"
        assert config.tolerances["fit"] == 5e-3
        assert config.output_directory == "out"

    def test_batch_names(self, batch_job):
        names = [config.name for config in load_jobs(batch_job, "out")]
        assert names == ["quotient-0", "calabi-m3", "poisson-oracle"]

    def test_invalid_job(self, bad_job):
        with pytest.raises(ConfigError, match="calabi needs parameters: m"):
            load_jobs(bad_job)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_jobs(tmp_path / "missing.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_jobs(path)

    def test_empty_batch(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text(json.dumps({"jobs": []}))
        with pytest.raises(ConfigError, match="non-empty"):
            load_jobs(path)
