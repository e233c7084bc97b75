"""Job configuration for the alekahler command line.

A job is a JSON object such as

    {"command": "calabi", "name": "calabi-m2", "parameters": {"m": 2},
     "grid": {"t_min": 1e-4, "t_max": 1e8, "n_points": 2000},
     "tolerances": {"newton": 1e-10, "quadrature": 1e-8, "fit": 5e-3},
     "output": {"directory": "out", "formats": ["json", "csv"]}}

and a batch file is {"jobs": [...]}. Missing keys take the per-command
defaults below; the output directory falls back to --out, then to the
ALEKAHLER_OUT environment variable.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from alekahler.radial_field import MIN_POINTS, RadialGrid
from alekahler.source_terms import SourceError, parse_source

COMMANDS = ("calabi", "poisson", "ma-solve", "pipeline", "quotient", "identities", "norms")
FORMATS = ("json", "csv")
OUTPUT_ENV = "ALEKAHLER_OUT"
FALLBACK_OUTPUT = "alekahler-out"

# grids are given in t = r^2; Poisson-type commands use the matching log-r grid
DEFAULT_GRIDS: dict[str, dict | None] = {
    "calabi": {"t_min": 1e-4, "t_max": 1e8, "n_points": 2000},
    "poisson": {"t_min": 1e-8, "t_max": 1e12, "n_points": 8001},
    "ma-solve": {"t_min": 1e-2, "t_max": 1e6, "n_points": 40001},
    "pipeline": {"t_min": 1e-2, "t_max": 1e6, "n_points": 40001},
    "quotient": None,
    "identities": {"t_min": 1e-8, "t_max": 1e12, "n_points": 8001},
    "norms": {"t_min": 1e-4, "t_max": 1e8, "n_points": 2001},
}
DEFAULT_TOLERANCES = {"newton": 1e-10, "quadrature": 1e-8, "fit": 5e-3}

REQUIRED_PARAMETERS = {
    "calabi": ("m",),
    "poisson": ("n", "source"),
    "ma-solve": ("m", "source"),
    "pipeline": ("m",),
    "quotient": (),
    "identities": (),
    "norms": ("source",),
}
TOP_LEVEL_KEYS = {"command", "name", "parameters", "grid", "tolerances", "output"}
# names become file stems, spaces turned into underscores
NAME_PATTERN = re.compile(r"[A-Za-z0-9][A-Za-z0-9 ._-]{0,99}")


class ConfigError(ValueError):
    """Raised for malformed job configurations."""


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _validate_grid(grid, defaults: dict | None) -> tuple[bool, str]:
    if not isinstance(grid, dict):
        return False, "grid must be an object"
    unknown = set(grid) - {"t_min", "t_max", "n_points"}
    if unknown:
        return False, f"unknown grid keys: {', '.join(sorted(unknown))}"
    if defaults is None and set(grid) != {"t_min", "t_max", "n_points"}:
        return False, "grid needs t_min, t_max and n_points"
    grid = {**(defaults or {}), **grid}
    t_min, t_max = grid["t_min"], grid["t_max"]
    if not (_is_number(t_min) and _is_number(t_max)):
        return False, "grid t_min and t_max must be finite numbers"
    if not 0 < t_min < t_max:
        return False, f"grid needs 0 < t_min < t_max, got [{t_min}, {t_max}]"
    n_points = grid["n_points"]
    if not isinstance(n_points, int) or isinstance(n_points, bool) or n_points < MIN_POINTS:
        return False, f"grid n_points must be an integer >= {MIN_POINTS}"
    return True, "valid"


def validate_config(raw) -> tuple[bool, str]:
    """Validate one job object.

    Checks:
    - command is known and its required parameters are present
    - grid has 0 < t_min < t_max and n_points >= 16
    - tolerances are positive
    - output formats are a subset of json, csv
    - source strings name a registered source
    - the name is usable as a file stem

    Args:
        raw: Parsed JSON object.

    Returns:
        Tuple of (is_valid, message).
        If valid, message is "valid".
        If invalid, message describes the error.
    """
    if not isinstance(raw, dict):
        return False, "job must be a JSON object"
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        return False, f"unknown keys: {', '.join(sorted(unknown))}"

    command = raw.get("command")
    if command not in COMMANDS:
        return False, f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}"

    name = raw.get("name", command)
    if not isinstance(name, str) or not name.strip():
        return False, "name must be a non-empty string"
    if not NAME_PATTERN.fullmatch(name):
        return False, (
            f"name {name!r} must start with a letter or digit and use only letters, digits, "
            "spaces, '.', '_' and '-' (at most 100 characters)"
        )

    parameters = raw.get("parameters", {})
    if not isinstance(parameters, dict):
        return False, "parameters must be an object"
    missing = [key for key in REQUIRED_PARAMETERS[command] if key not in parameters]
    if missing:
        return False, f"{command} needs parameters: {', '.join(missing)}"
    source = parameters.get("source")
    if isinstance(source, str):
        try:
            parse_source(source)
        except SourceError as e:
            return False, str(e)
    elif source is not None and not (isinstance(source, dict) and "csv" in source):
        return False, "source must be a registry string or {\"csv\": path}"

    if raw.get("grid") is not None:
        ok, message = _validate_grid(raw["grid"], DEFAULT_GRIDS[command])
        if not ok:
            return ok, message

    tolerances = raw.get("tolerances", {})
    if not isinstance(tolerances, dict):
        return False, "tolerances must be an object"
    for key, value in tolerances.items():
        if key not in DEFAULT_TOLERANCES:
            return False, f"unknown tolerance {key!r}"
        if not _is_number(value) or value <= 0:
            return False, f"tolerance {key} must be positive, got {value!r}"

    output = raw.get("output", {})
    if not isinstance(output, dict):
        return False, "output must be an object"
    formats = output.get("formats", list(FORMATS))
    if not isinstance(formats, list) or not set(formats) <= set(FORMATS):
        return False, f"output formats must be a subset of {list(FORMATS)}"
    directory = output.get("directory")
    if directory is not None and not isinstance(directory, str):
        return False, "output directory must be a string"

    return True, "valid"


def default_output_directory(cli_value: str | None = None) -> str:
    """--out, else $ALEKAHLER_OUT, else ./alekahler-out."""
    return cli_value or os.environ.get(OUTPUT_ENV) or FALLBACK_OUTPUT


@dataclass(frozen=True)
class JobConfig:
    """One validated job with every default filled in."""

    command: str
    name: str
    parameters: dict = field(default_factory=dict)
    grid: dict | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output_directory: str = FALLBACK_OUTPUT
    formats: tuple[str, ...] = FORMATS

    @classmethod
    def from_dict(cls, raw, default_directory: str | None = None) -> JobConfig:
        """Validate and complete a job object.

        Raises:
            ConfigError: With the validator's message.
        """
        ok, message = validate_config(raw)
        if not ok:
            raise ConfigError(message)
        command = raw["command"]
        grid = DEFAULT_GRIDS[command]
        if grid is not None or raw.get("grid") is not None:
            grid = {**(grid or {}), **(raw.get("grid") or {})}
        output = raw.get("output", {})
        return cls(
            command=command,
            name=raw.get("name", command),
            parameters=dict(raw.get("parameters", {})),
            grid=grid,
            tolerances={**DEFAULT_TOLERANCES, **raw.get("tolerances", {})},
            output_directory=output.get("directory") or default_output_directory(default_directory),
            formats=tuple(output.get("formats", FORMATS)),
        )

    def to_dict(self) -> dict:
        """Echo that reproduces this job through from_dict."""
        echo = {
            "command": self.command,
            "name": self.name,
            "parameters": self.parameters,
            "tolerances": self.tolerances,
            "output": {"directory": self.output_directory, "formats": list(self.formats)},
        }
        if self.grid is not None:
            echo["grid"] = self.grid
        return echo

    def build_grid(self, coordinate: str = "log_t") -> RadialGrid:
        """The job grid, uniform in log t or in log r over the same range."""
        if self.grid is None:
            raise ConfigError(f"{self.command} jobs carry no grid")
        t_min, t_max, n_points = self.grid["t_min"], self.grid["t_max"], self.grid["n_points"]
        if coordinate == "log_r":
            return RadialGrid.log_r(math.sqrt(t_min), math.sqrt(t_max), n_points)
        return RadialGrid.log_t(t_min, t_max, n_points)


def load_jobs(path: str | Path, default_directory: str | None = None) -> list[JobConfig]:
    """Read a single job or a {"jobs": [...]} batch from a JSON file.

    Batch jobs without a name are called <command>-<index>.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e

    if isinstance(raw, dict) and "jobs" in raw:
        jobs = raw["jobs"]
        if not isinstance(jobs, list) or not jobs:
            raise ConfigError("jobs must be a non-empty list")
        configs = []
        for index, job in enumerate(jobs):
            if isinstance(job, dict) and "name" not in job and "command" in job:
                job = {**job, "name": f"{job['command']}-{index}"}
            configs.append(JobConfig.from_dict(job, default_directory))
        return configs
    return [JobConfig.from_dict(raw, default_directory)]
