"""Named right-hand sides shared by the Poisson and Monge-Ampere commands.

A source is written as a name followed by numeric parameters, e.g.
"inverse_quadratic_power 3 8" for 8 (1 + r^2)^-3, or as {"csv": path} for
tabulated (r, f) samples. Every builder evaluates f as a function of the
geometric radius r on the given grid.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from pathlib import Path

import numpy as np
from scipy.special import beta as beta_function

from alekahler.radial_field import RadialFunction, RadialGrid

logger = logging.getLogger(__name__)


class SourceError(ValueError):
    """Raised for unknown source names or malformed parameters."""


def inverse_quadratic_power(r: np.ndarray, n: int, p: float, scale: float = 1.0):
    """scale (1 + r^2)^-p; decay weight -2p."""
    return scale * (1.0 + r * r) ** (-p), -2.0 * p


def _bump_parts(r: np.ndarray, radius: float, amplitude: float):
    """Bump b = amplitude exp(1 - 1/(1 - (r/R)^2)) with b'/b and b''/b."""
    inside = r < radius
    y = np.where(inside, 1.0 - (r / radius) ** 2, 1.0)
    b = np.where(inside, amplitude * np.exp(1.0 - 1.0 / y), 0.0)
    k = -2.0 * r / (radius**2 * y**2)
    k1 = -2.0 / (radius**2 * y**2) - 8.0 * r * r / (radius**4 * y**3)
    return b, k, k * k + k1


def compact_bump(r: np.ndarray, n: int, radius: float, amplitude: float = 1.0):
    """Smooth bump supported in r < radius, peak value amplitude at r = 0."""
    if radius <= 0:
        raise SourceError(f"bump radius must be positive, got {radius}")
    b, _, _ = _bump_parts(r, radius, amplitude)
    # compact support lies in every weighted space; -n - 1 is below -n
    return b, -float(n) - 1.0


def laplacian_of_bump(r: np.ndarray, n: int, radius: float, amplitude: float = 1.0):
    """Delta of compact_bump in dimension n; zero mean, so u is the bump itself."""
    if radius <= 0:
        raise SourceError(f"bump radius must be positive, got {radius}")
    b, k, k2 = _bump_parts(r, radius, amplitude)
    return -(b * k2 + (n - 1) * b * k / r), -float(n) - 1.0


def delta_rho_power(r: np.ndarray, n: int):
    """Delta(rho^(2-n)) = n (n-2) (1 + r^2)^(-(n+2)/2)."""
    return n * (n - 2) * (1.0 + r * r) ** (-(n + 2) / 2.0), -float(n) - 2.0


SOURCES: dict[str, Callable] = {
    "inverse_quadratic_power": inverse_quadratic_power,
    "compact_bump": compact_bump,
    "laplacian_of_bump": laplacian_of_bump,
    "delta_rho_power": delta_rho_power,
}


def parse_source(text: str) -> tuple[str, list[float]]:
    """Split "name p1 p2" into the name and float parameters."""
    parts = text.split()
    if not parts:
        raise SourceError("empty source specification")
    name, *params = parts
    if name not in SOURCES:
        raise SourceError(f"unknown source {name!r}; known: {', '.join(sorted(SOURCES))}")
    try:
        return name, [float(p) for p in params]
    except ValueError as e:
        raise SourceError(f"non-numeric parameter in {text!r}") from e


def load_csv_source(path: str | Path, grid: RadialGrid) -> RadialFunction:
    """Samples (r, f) from a headed CSV, interpolated in log r, zero beyond the last r."""
    path = Path(path)
    if not path.exists():
        raise SourceError(f"source file not found: {path}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] < 2 or data.shape[0] < 2:
        raise SourceError(f"{path} needs at least two rows of (r, f)")
    r_samples, f_samples = data[:, 0], data[:, 1]
    if np.any(r_samples <= 0) or np.any(np.diff(r_samples) <= 0):
        raise SourceError("CSV radii must be positive and increasing")
    values = np.interp(
        np.log(grid.r), np.log(r_samples), f_samples, left=f_samples[0], right=0.0
    )
    logger.info("loaded %d source samples from %s", r_samples.size, path)
    return RadialFunction(grid, values)


def build_source(
    spec: str | dict, grid: RadialGrid, n: int, beta: float | None = None
) -> tuple[RadialFunction, float]:
    """Evaluate a named or tabulated source on grid for real dimension n.

    Returns:
        (f, beta), with beta taken from the builder unless given.
    """
    if isinstance(spec, dict):
        if "csv" not in spec:
            raise SourceError("tabulated sources are given as {\"csv\": path}")
        if beta is None:
            raise SourceError("tabulated sources need an explicit beta")
        return load_csv_source(spec["csv"], grid), float(beta)
    name, params = parse_source(spec)
    try:
        values, default_beta = SOURCES[name](grid.r, n, *params)
    except TypeError as e:
        raise SourceError(f"wrong number of parameters for {name}: {params}") from e
    return RadialFunction(grid, values), float(default_beta if beta is None else beta)


def closed_form_coefficient(spec: str | dict, n: int) -> float | None:
    """Exact A = int_0^inf f s^(n-1) ds / (n-2) where the source admits one.

    Weights in (-n, -2) have A = 0. Returns None when no closed form is known.
    """
    if isinstance(spec, dict):
        return None
    name, params = parse_source(spec)
    if name == "inverse_quadratic_power":
        p, scale = params[0], params[1] if len(params) > 1 else 1.0
        if 2.0 < 2.0 * p < n:
            return 0.0
        if 2.0 * p <= n:
            return None
        return scale * float(beta_function(n / 2.0, p - n / 2.0)) / (2.0 * (n - 2))
    if name == "laplacian_of_bump":
        return 0.0
    if name == "delta_rho_power":
        return 1.0
    return None


def closed_form_solution(spec: str | dict, n: int) -> Callable | None:
    """Decaying solution r -> u(r) of Delta u = f, or None if not known."""
    if isinstance(spec, dict):
        return None
    name, params = parse_source(spec)

    def rho_power(r):
        return (1.0 + r * r) ** ((2.0 - n) / 2.0)

    if name == "delta_rho_power":
        return rho_power
    if name == "inverse_quadratic_power" and params[0] == (n + 2) / 2.0:
        scale = params[1] if len(params) > 1 else 1.0
        return lambda r: scale / (n * (n - 2)) * rho_power(r)
    if name == "laplacian_of_bump":
        radius, amplitude = params[0], params[1] if len(params) > 1 else 1.0
        return lambda r: _bump_parts(r, radius, amplitude)[0]
    return None
