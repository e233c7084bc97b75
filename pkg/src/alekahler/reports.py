"""Run reports, acceptance checks and their files on disk.

Summaries are JSON with sorted keys; profiles are CSV with a header row and
%.17g numbers. Both are written atomically (temp file in the target
directory, then move) so an interrupted run never leaves a partial file.
Nothing time-dependent is written, so identical jobs give identical bytes.
"""

from __future__ import annotations

import io
import json
import logging
import math
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from alekahler.config import JobConfig

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.17g"


@dataclass(frozen=True)
class Check:
    """One acceptance check and where its target comes from."""

    name: str
    provenance: str
    computed: float | bool | None
    target: float | bool | None
    tolerance: float | None
    passed: bool

    @classmethod
    def close(
        cls,
        name: str,
        provenance: str,
        computed: float,
        target: float,
        tolerance: float,
        relative: bool = False,
    ) -> Check:
        """|computed - target| <= tolerance, scaled by |target| when relative."""
        scale = abs(target) if relative and target != 0 else 1.0
        passed = math.isfinite(computed) and abs(computed - target) <= tolerance * scale
        return cls(name, provenance, float(computed), float(target), tolerance, passed)

    @classmethod
    def below(cls, name: str, provenance: str, computed: float, bound: float) -> Check:
        """computed < bound."""
        passed = math.isfinite(computed) and computed < bound
        return cls(name, provenance, float(computed), float(bound), None, passed)

    @classmethod
    def holds(cls, name: str, provenance: str, value: bool) -> Check:
        return cls(name, provenance, bool(value), True, None, bool(value))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "provenance": self.provenance,
            "computed": self.computed,
            "target": self.target,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


@dataclass(eq=False)
class RunReport:
    """Outcome of one job.

    Attributes:
        config: The job as run (echoed into the summary).
        results: Command-specific summary values.
        checks: Acceptance checks.
        profiles: CSV series, profile name -> ordered {column: values}.
        wall_time: Seconds; logged but never written.
    """

    config: JobConfig
    results: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    profiles: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def stem(self) -> str:
        return self.config.name.replace(" ", "_")

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "results": self.results,
            "checks": [check.to_dict() for check in self.checks],
            "passed": self.passed,
        }


def _jsonable(value):
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    if isinstance(value, Fraction):
        return str(value)
    return value


def to_json(data) -> str:
    return json.dumps(_jsonable(data), sort_keys=True, indent=2) + "\n"


def atomic_write(path: str | Path, text: str) -> Path:
    """Write text to path via a temp file in the same directory.

    Raises:
        OSError: If the directory cannot be created or written.
    """
    output = Path(path)
    output.parent.mkdir(parents=True, exist_ok=True)
    temp_fd = None
    temp_path = None
    try:
        temp_fd, temp_path = tempfile.mkstemp(
            dir=output.parent, prefix=".alekahler_", suffix=".tmp"
        )
        with open(temp_fd, "w", encoding="utf-8", newline="") as f:
            temp_fd = None
            f.write(text)
        shutil.move(temp_path, output)
        temp_path = None
        return output
    finally:
        # Clean up temp file on failure
        if temp_fd is not None:
            try:
                os.close(temp_fd)
            except OSError:
                pass
        if temp_path is not None:
            Path(temp_path).unlink(missing_ok=True)


def profile_csv(columns: dict[str, np.ndarray]) -> str:
    """CSV text with a header row and one row per grid node."""
    table = np.column_stack([np.asarray(v, dtype=float) for v in columns.values()])
    buffer = io.StringIO()
    np.savetxt(buffer, table, fmt=CSV_FORMAT, delimiter=",",
               header=",".join(columns), comments="")
    return buffer.getvalue()


def emit_plot_series(report: RunReport, directory: str | Path | None = None) -> list[Path]:
    """Write every profile of the report as <stem>-<profile>.csv."""
    directory = Path(directory or report.config.output_directory)
    written = []
    for profile, columns in report.profiles.items():
        path = directory / f"{report.stem}-{profile}.csv"
        written.append(atomic_write(path, profile_csv(columns)))
        logger.debug("wrote %s", path)
    return written


def write_report(report: RunReport, directory: str | Path | None = None) -> list[Path]:
    """Write the JSON summary and CSV profiles requested by the job's formats."""
    directory = Path(directory or report.config.output_directory)
    written = []
    if "json" in report.config.formats:
        written.append(atomic_write(directory / f"{report.stem}.json", to_json(report.to_dict())))
    if "csv" in report.config.formats:
        written.extend(emit_plot_series(report, directory))
    logger.info("%s: %d files in %s (%.2fs)", report.config.name, len(written), directory,
                report.wall_time)
    return written
