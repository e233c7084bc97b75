#!/usr/bin/env python3
"""Calabi's explicit Ricci-flat ALE Kahler metric on the resolution of C^m/Z_m.

Usage:
    alekahler-calabi <m> [--class-constant=1.0] [--t-min=1e-4] [--t-max=1e8]

Prints the Ricci-flat residual, the fitted asymptotic coefficient against
-c/(m(m-1)) and the decay slopes of the metric deviation.

Potentials are functions of t = r^2. A radial potential Phi induces metric
eigenvalues Phi' (transverse, multiplicity m-1) and Phi' + t Phi'' (radial),
so Phi = t is the Euclidean metric.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.special import binom

from alekahler.radial_field import (
    DecayError,
    GridError,
    RadialFunction,
    RadialGrid,
    decay_order,
    difference_matrices,
)

logger = logging.getLogger(__name__)

IMAGINARY_TOLERANCE = 1e-12
# binomial far-field series is used once (t/a)^m >= 2^m
FAR_FIELD_START = 2.0
FAR_FIELD_TERMS = 40
DEFAULT_FIT_WINDOW = (1e4, 1e8)
DEFAULT_DECAY_WINDOW = (10.0, 1e3)
MIN_WINDOW_RATIO = 10.0
# nodes at each end without sixth-order extrapolated stencils
STENCIL_EDGE = 5


class CalabiError(ValueError):
    """Raised for invalid arguments to the Calabi evaluators and fits."""


class PositivityError(ArithmeticError):
    """A metric eigenvalue is not positive.

    Attributes:
        node: Index of the first violating grid node.
        t: Squared radius at that node.
    """

    def __init__(self, message: str, node: int, t: float):
        super().__init__(f"{message} (node {node}, t={t:.6g})")
        self.node = node
        self.t = t


def _check_arguments(m: int, t, class_constant: float) -> np.ndarray:
    if int(m) != m or m < 2:
        raise CalabiError(f"complex dimension must be an integer >= 2, got {m}")
    if class_constant < 0:
        raise CalabiError(f"class constant must be nonnegative, got {class_constant}")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise CalabiError("Calabi potential needs t > 0")
    return t


def _log_s(m: int, u: np.ndarray) -> np.ndarray:
    """log (u^m + 1)^(1/m) without overflow."""
    small = u <= 1.0
    safe = np.where(small, u, 1.0)
    big = np.where(small, 1.0, u)
    return np.where(
        small,
        np.log1p(safe**m) / m,
        np.log(big) + np.log1p(big ** (-m)) / m,
    )


def _log_sum(m: int, u: np.ndarray) -> np.ndarray:
    """s + (1/m) sum_j zeta^j log(s - zeta^j) as a complex array, s = (u^m+1)^(1/m)."""
    log_s = _log_s(m, u)
    s = np.exp(log_s)
    # s - 1 from expm1 keeps the j = 0 logarithm accurate as u -> 0
    total = s + np.log(np.expm1(log_s)) / m + 0j
    for j in range(1, m):
        zeta = np.exp(2j * np.pi * j / m)
        total = total + zeta * np.log(s - zeta) / m
    return total


def _far_field_series(m: int, u: np.ndarray, first: int) -> np.ndarray:
    """sum_{k >= first} binom(1/m, k) u^(1-mk) / (1-mk)."""
    ks = np.arange(first, FAR_FIELD_TERMS + 1)
    coeffs = binom(1.0 / m, ks) / (1.0 - m * ks)
    powers = u[..., None] ** (1.0 - m * ks)
    return np.sum(coeffs * powers, axis=-1)


def _scaled(m: int, t: np.ndarray, class_constant: float) -> tuple[float, np.ndarray]:
    a = class_constant ** (1.0 / m)
    return a, t / a


def calabi_offset(m: int, t, class_constant: float = 1.0):
    """Phi(t) - t, accurate for large t where Phi and t nearly cancel."""
    t = _check_arguments(m, t, class_constant)
    if class_constant == 0:
        return np.zeros_like(t)[()]
    a, u = _scaled(m, t, class_constant)
    far = u >= FAR_FIELD_START
    u_far = np.where(far, u, FAR_FIELD_START)
    u_near = np.where(far, 1.0, u)
    near_value = _log_sum(m, u_near).real - u_near
    far_value = _far_field_series(m, u_far, 1)
    return (a * np.where(far, far_value, near_value))[()]


def calabi_potential(m: int, t, class_constant: float = 1.0):
    """Calabi's potential at t = r^2, scaled to the given class constant.

    With s = (t^m + 1)^(1/m) and zeta = exp(2 pi i/m) the unit-class potential is
    s + (1/m) sum_j zeta^j log(s - zeta^j); the class-c potential is
    a Phi_1(t/a) with a = c^(1/m).

    Raises:
        CalabiError: If t <= 0 or the complex sum leaves an imaginary part.
    """
    t = _check_arguments(m, t, class_constant)
    if class_constant == 0:
        return t[()]
    residue = calabi_imaginary_residue(m, t, class_constant)
    if residue > IMAGINARY_TOLERANCE:
        raise CalabiError(f"complex log sum has imaginary part {residue:.3g}")
    return (t + calabi_offset(m, t, class_constant))[()]


def calabi_imaginary_residue(m: int, t, class_constant: float = 1.0) -> float:
    """Largest imaginary part of the complex log sum over the given t."""
    t = _check_arguments(m, t, class_constant)
    if class_constant == 0:
        return 0.0
    a, u = _scaled(m, t, class_constant)
    return float(np.max(np.abs(a * _log_sum(m, np.atleast_1d(u)).imag)))


def calabi_derivatives(m: int, t, class_constant: float = 1.0):
    """(Phi', Phi' + t Phi'') in closed form: (s/t, t^(m-1)/s^(m-1)) at unit class."""
    t = _check_arguments(m, t, class_constant)
    if class_constant == 0:
        return np.ones_like(t)[()], np.ones_like(t)[()]
    _, u = _scaled(m, t, class_constant)
    gap = _log_s(m, u) - np.log(u)
    return np.exp(gap)[()], np.exp(-(m - 1) * gap)[()]


def calabi_second_derivative(m: int, t, class_constant: float = 1.0):
    """Phi'' = -1/(t^2 s^(m-1)) at unit class, scaled by 1/a otherwise."""
    t = _check_arguments(m, t, class_constant)
    if class_constant == 0:
        return np.zeros_like(t)[()]
    a, u = _scaled(m, t, class_constant)
    return (-np.exp(-(m - 1) * _log_s(m, u)) / (u * u) / a)[()]


def asymptotic_constant(m: int, class_constant: float = 1.0) -> float:
    """A = -c/(m(m-1)), the t^(1-m) coefficient of Phi - t."""
    return -class_constant / (m * (m - 1))


def calabi_remainder(m: int, t, class_constant: float = 1.0):
    """chi = Phi - t - A t^(1-m), evaluated without cancellation for large t."""
    t = _check_arguments(m, t, class_constant)
    if class_constant == 0:
        return np.zeros_like(t)[()]
    a, u = _scaled(m, t, class_constant)
    far = u >= FAR_FIELD_START
    u_far = np.where(far, u, FAR_FIELD_START)
    far_value = a * _far_field_series(m, u_far, 2)
    near_value = calabi_offset(m, t, class_constant) - asymptotic_constant(
        m, class_constant
    ) * t ** (1.0 - m)
    return np.where(far, far_value, near_value)[()]


@dataclass(frozen=True, eq=False)
class RadialKahlerPotential:
    """A U(m)-invariant Kahler potential Phi(t) on a log-t grid.

    Attributes:
        m: Complex dimension.
        phi: Potential values (with analytic t-derivatives when known).
        class_constant: lim_{t->0} t^m (Phi')^m.
        eigenvalues: Optional closed form t -> (Phi', Phi' + t Phi''). The radial
            eigenvalue is tiny where Phi' and t Phi'' nearly cancel, so closed
            forms should supply it directly.
    """

    m: int
    phi: RadialFunction
    class_constant: float = 1.0
    eigenvalues: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None

    def __post_init__(self) -> None:
        if self.phi.grid.coordinate != "log_t":
            raise GridError("Kahler potentials live on log-t grids")
        if self.m < 2:
            raise CalabiError(f"complex dimension must be at least 2, got {self.m}")

    @property
    def grid(self) -> RadialGrid:
        return self.phi.grid

    @classmethod
    def flat(cls, m: int, grid: RadialGrid) -> RadialKahlerPotential:
        return cls(
            m,
            RadialFunction.closed_form(
                grid,
                lambda t: t.copy(),
                {1: np.ones_like, 2: np.zeros_like},
            ),
            0.0,
            lambda t: (np.ones_like(t), np.ones_like(t)),
        )

    @classmethod
    def calabi(
        cls, m: int, grid: RadialGrid, class_constant: float = 1.0
    ) -> RadialKahlerPotential:
        return cls(
            m,
            RadialFunction.closed_form(
                grid,
                lambda t: calabi_potential(m, t, class_constant),
                {
                    1: lambda t: calabi_derivatives(m, t, class_constant)[0],
                    2: lambda t: calabi_second_derivative(m, t, class_constant),
                },
            ),
            class_constant,
            lambda t: calabi_derivatives(m, t, class_constant),
        )

    def transverse_eigenvalue(self) -> np.ndarray:
        """Phi'."""
        if self.eigenvalues is not None:
            return np.asarray(self.eigenvalues(self.grid.t)[0], dtype=float)
        return self.phi.derivative(1, "t")

    def radial_eigenvalue(self) -> np.ndarray:
        """Phi' + t Phi''."""
        if self.eigenvalues is not None:
            return np.asarray(self.eigenvalues(self.grid.t)[1], dtype=float)
        # Phi' + t Phi'' = Phi_xx / t for x = log t
        return self.phi.x_derivative(2) / self.grid.t

    def volume_density(self) -> np.ndarray:
        """(Phi')^(m-1) (Phi' + t Phi''), the volume ratio against flat."""
        return self.transverse_eigenvalue() ** (self.m - 1) * self.radial_eigenvalue()

    def positivity_margin(self) -> float:
        return float(min(self.transverse_eigenvalue().min(), self.radial_eigenvalue().min()))

    def check_positive(self, message: str = "metric eigenvalue not positive") -> None:
        bad = (self.transverse_eigenvalue() <= 0) | (self.radial_eigenvalue() <= 0)
        if bad.any():
            node = int(np.flatnonzero(bad)[0])
            raise PositivityError(message, node, float(self.grid.t[node]))


def _extrapolated_derivatives(values: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """First and second x-derivatives with the h^4 stencil error cancelled.

    Combines the grid stencils at spacings h and 2h (the latter on the even and
    odd sub-grids). Only nodes at least STENCIL_EDGE from either end are sixth order.
    """
    d1, d2 = difference_matrices(values.size, h)
    fine = (d1 @ values, d2 @ values)
    coarse = (np.empty_like(values), np.empty_like(values))
    for start in (0, 1):
        sub = values[start::2]
        c1, c2 = difference_matrices(sub.size, 2.0 * h)
        coarse[0][start::2] = c1 @ sub
        coarse[1][start::2] = c2 @ sub
    first, second = ((16.0 * f - c) / 15.0 for f, c in zip(fine, coarse))
    return first, second


def ricci_flat_residual(
    m: int,
    grid: RadialGrid,
    method: str = "closed_form",
    class_constant: float = 1.0,
) -> float:
    """max |(Phi')^(m-1) (Phi' + t Phi'') - 1| over the grid.

    Args:
        m: Complex dimension.
        grid: A log-t grid.
        method: "closed_form" or "finite_difference". The latter differentiates
            sampled values of Phi - t with extrapolated stencils, skips
            STENCIL_EDGE nodes at each end and divides each node's residual by
            max(1, (Phi')^m), the size of the two terms that cancel near the
            zero section.
        class_constant: Kahler class on the ray.
    """
    if grid.coordinate != "log_t":
        raise GridError("Ricci-flat residual needs a log-t grid")
    t = grid.t
    if method == "closed_form":
        transverse, radial = calabi_derivatives(m, t, class_constant)
        return float(np.max(np.abs(transverse ** (m - 1) * radial - 1.0)))
    if method != "finite_difference":
        raise CalabiError(f"unknown method {method!r}")
    if grid.n_points < 4 * STENCIL_EDGE:
        raise GridError(f"need at least {4 * STENCIL_EDGE} nodes for extrapolated stencils")
    offset_x, offset_xx = _extrapolated_derivatives(calabi_offset(m, t, class_constant), grid.h)
    # Phi_x = t + offset_x and Phi_xx = t + offset_xx, divided by t
    transverse = 1.0 + offset_x / t
    radial = 1.0 + offset_xx / t
    relative = np.abs(transverse ** (m - 1) * radial - 1.0) / np.maximum(1.0, transverse**m)
    return float(np.max(relative[STENCIL_EDGE:-STENCIL_EDGE]))


def fit_leading_coefficient(t: np.ndarray, offset: np.ndarray, m: int) -> tuple[float, float]:
    """Least-squares fit of offset ~ C + A t^(1-m) + B t^(-m).

    Returns:
        (C, A)
    """
    t = np.asarray(t, dtype=float)
    basis = np.column_stack([np.ones_like(t), t ** (1.0 - m), t ** (-float(m))])
    scale = np.max(np.abs(basis), axis=0)
    coeffs, *_ = np.linalg.lstsq(basis / scale, np.asarray(offset, dtype=float), rcond=None)
    coeffs = coeffs / scale
    return float(coeffs[0]), float(coeffs[1])


def asymptotic_coefficient(
    m: int,
    fit_window: tuple[float, float] = DEFAULT_FIT_WINDOW,
    class_constant: float = 1.0,
    n_samples: int = 64,
) -> float:
    """Fitted t^(1-m) coefficient of Phi - t over a window of t values."""
    t_lo, t_hi = fit_window
    if not (t_lo > 0 and t_hi >= MIN_WINDOW_RATIO * t_lo) or n_samples < 3:
        raise CalabiError(f"fit window [{t_lo}, {t_hi}] too small for a stable fit")
    t = np.geomspace(t_lo, t_hi, n_samples)
    constant, coefficient = fit_leading_coefficient(t, calabi_offset(m, t, class_constant), m)
    logger.debug("asymptotic fit m=%d: A=%.12g constant=%.3g", m, coefficient, constant)
    return coefficient


def _profile_grid(window: tuple[float, float], n_points: int) -> RadialGrid:
    r_lo, r_hi = window
    if not 0 < r_lo < r_hi:
        raise DecayError(f"bad decay window [{r_lo}, {r_hi}]")
    return RadialGrid.log_r(r_lo / 2.0, r_hi * 2.0, n_points)


def metric_decay_profile(
    m: int,
    k: int,
    window: tuple[float, float] = DEFAULT_DECAY_WINDOW,
    n_points: int = 2001,
) -> float:
    """Decay order of d^k/dr^k (Phi' - 1), expected -2m-k."""
    if k not in (0, 1, 2):
        raise CalabiError(f"derivative order must be 0, 1 or 2, got {k}")
    grid = _profile_grid(window, n_points)
    u = grid.t
    deviation = np.expm1(np.log1p(u ** (-float(m))) / m)
    return decay_order(RadialFunction(grid, deviation), k, window)


def remainder_decay(
    m: int,
    k: int,
    window: tuple[float, float] = DEFAULT_DECAY_WINDOW,
    n_points: int = 2001,
) -> float:
    """Decay order of d^k chi / dr^k; bounded above by -2m-k, exactly 2-4m-k."""
    if k not in (0, 1, 2):
        raise CalabiError(f"derivative order must be 0, 1 or 2, got {k}")
    grid = _profile_grid(window, n_points)
    return decay_order(RadialFunction(grid, calabi_remainder(m, grid.t)), k, window)


def main() -> int:
    """CLI entry point."""
    parser = argparse.ArgumentParser(
        description="Summarize Calabi's Ricci-flat ALE metric for one dimension"
    )
    parser.add_argument("m", type=int, help="Complex dimension (>= 2)")
    parser.add_argument("--class-constant", type=float, default=1.0,
                        help="Kahler class constant c > 0 (default: 1.0)")
    parser.add_argument("--t-min", type=float, default=1e-4,
                        help="Smallest t = r^2 on the grid (default: 1e-4)")
    parser.add_argument("--t-max", type=float, default=1e8,
                        help="Largest t = r^2 on the grid (default: 1e8)")
    parser.add_argument("--n-points", type=int, default=2000,
                        help="Grid nodes (default: 2000)")
    args = parser.parse_args()

    try:
        grid = RadialGrid.log_t(args.t_min, args.t_max, args.n_points)
        residual = ricci_flat_residual(args.m, grid, class_constant=args.class_constant)
        fitted = asymptotic_coefficient(args.m, class_constant=args.class_constant)
        slopes = [metric_decay_profile(args.m, k) for k in (0, 1, 2)]
    except (CalabiError, GridError, DecayError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

    print(f"ricci_flat_residual: {residual:.3e}")
    print(f"asymptotic_coefficient: {fitted:.10f} "
          f"(exact {asymptotic_constant(args.m, args.class_constant):.10f})")
    for k, slope in enumerate(slopes):
        print(f"decay_order k={k}: {slope:.4f} (expected {-2 * args.m - k})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
