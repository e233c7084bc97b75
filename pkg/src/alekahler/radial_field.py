"""Radial functions on log-spaced grids: derivatives, weighted norms, decay fits.

A grid is uniform in x = log t (Kahler contexts, t = r^2) or x = log r (real
contexts). Derivatives are taken in x with fourth-order finite differences and
converted to the geometric variable; functions built from closed forms carry
analytic derivatives that take precedence over the stencils.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.stats import linregress

logger = logging.getLogger(__name__)

MIN_POINTS = 16
MAX_DERIVATIVE_ORDER = 4
UNIFORMITY_TOLERANCE = 1e-12
COORDINATES = ("log_t", "log_r")

# var^k d^k/dvar^k = sum_j s(k, j) theta^j, theta = d/dx (signed Stirling, first kind)
STIRLING_FIRST = {
    1: (1,),
    2: (-1, 1),
    3: (2, -3, 1),
    4: (-6, 11, -6, 1),
}
# theta^j = sum_i S(j, i) var^i d^i/dvar^i (Stirling, second kind)
STIRLING_SECOND = {
    1: (1,),
    2: (1, 1),
    3: (1, 3, 1),
    4: (1, 7, 6, 1),
}

# fourth-order stencils, numerators over 12h (first) and 12h^2 (second)
CENTRAL_FIRST = (1, -8, 0, 8, -1)
CENTRAL_SECOND = (-1, 16, -30, 16, -1)
EDGE_FIRST = ((-25, 48, -36, 16, -3), (-3, -10, 18, -6, 1))
EDGE_SECOND = ((45, -154, 214, -156, 61, -10), (10, -15, -4, 14, -6, 1))


class GridError(ValueError):
    """Raised for malformed grids or unsupported derivative requests."""


class DecayError(ValueError):
    """Raised when a decay order cannot be fitted."""


def difference_matrices(n: int, h: float) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """Fourth-order first and second derivative matrices on n uniform nodes.

    Central five-point stencils in the interior, one-sided closures on the two
    nodes nearest each end.
    """
    if n < 6:
        raise GridError(f"need at least 6 nodes for the stencils, got {n}")
    interior = np.arange(2, n - 2)

    def assemble(central, edges, mirror_sign):
        rows, cols, vals = [], [], []
        for offset, c in enumerate(central):
            rows.append(interior)
            cols.append(interior + offset - 2)
            vals.append(np.full(interior.size, float(c)))
        for row, stencil in enumerate(edges):
            width = len(stencil)
            rows += [np.full(width, row), np.full(width, n - 1 - row)]
            cols += [np.arange(width), n - 1 - np.arange(width)]
            vals += [np.array(stencil, float), mirror_sign * np.array(stencil, float)]
        matrix = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )
        return matrix.tocsr()

    d1 = assemble(CENTRAL_FIRST, EDGE_FIRST, -1.0)
    d2 = assemble(CENTRAL_SECOND, EDGE_SECOND, 1.0)
    return d1 / (12.0 * h), d2 / (12.0 * h * h)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform grid in a log coordinate.

    Attributes:
        coordinate: "log_t" (x = log r^2) or "log_r" (x = log r).
        x: Node coordinates, strictly increasing and uniformly spaced.
    """

    coordinate: str
    x: np.ndarray

    def __post_init__(self) -> None:
        if self.coordinate not in COORDINATES:
            raise GridError(f"unknown coordinate {self.coordinate!r}")
        x = np.asarray(self.x, dtype=float)
        object.__setattr__(self, "x", x)
        if x.ndim != 1 or x.size < MIN_POINTS:
            raise GridError(f"grid needs at least {MIN_POINTS} nodes")
        if not np.all(np.isfinite(x)):
            raise GridError("grid coordinates must be finite")
        steps = np.diff(x)
        if np.any(steps <= 0):
            raise GridError("grid coordinates must be strictly increasing")
        scale = max(1.0, float(np.max(np.abs(x))))
        if np.max(np.abs(steps - steps.mean())) > UNIFORMITY_TOLERANCE * scale:
            raise GridError("grid spacing is not uniform in the log coordinate")

    @classmethod
    def log_t(cls, t_min: float, t_max: float, n_points: int) -> RadialGrid:
        """Grid uniform in log t over [t_min, t_max]."""
        _check_range(t_min, t_max)
        return cls("log_t", np.linspace(np.log(t_min), np.log(t_max), n_points))

    @classmethod
    def log_r(cls, r_min: float, r_max: float, n_points: int) -> RadialGrid:
        """Grid uniform in log r over [r_min, r_max]."""
        _check_range(r_min, r_max)
        return cls("log_r", np.linspace(np.log(r_min), np.log(r_max), n_points))

    @property
    def n_points(self) -> int:
        return self.x.size

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def native(self) -> str:
        """Variable whose logarithm is x: "t" or "r"."""
        return "t" if self.coordinate == "log_t" else "r"

    @cached_property
    def t(self) -> np.ndarray:
        return np.exp(self.x) if self.coordinate == "log_t" else np.exp(2.0 * self.x)

    @cached_property
    def r(self) -> np.ndarray:
        return np.exp(0.5 * self.x) if self.coordinate == "log_t" else np.exp(self.x)

    @property
    def t_min(self) -> float:
        return float(self.t[0])

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    def variable(self, name: str) -> np.ndarray:
        if name == "t":
            return self.t
        if name == "r":
            return self.r
        raise GridError(f"unknown variable {name!r}")

    def log_scale(self, name: str) -> float:
        """d(log var)/dx for the named variable."""
        if name == self.native:
            return 1.0
        # log r = x/2 on a log-t grid, log t = 2x on a log-r grid
        return 0.5 if name == "r" else 2.0

    @cached_property
    def difference_matrices(self) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
        return difference_matrices(self.n_points, self.h)


def _check_range(lo: float, hi: float) -> None:
    if not (lo > 0 and hi > lo):
        raise GridError(f"need 0 < min < max, got [{lo}, {hi}]")


Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """Values of a radial function on a grid.

    Attributes:
        grid: The grid the values live on.
        values: One finite real per node.
        derivatives: Optional analytic derivatives, keyed by order, as
            functions of the grid's native variable (t or r).
    """

    grid: RadialGrid
    values: np.ndarray
    derivatives: Mapping[int, Evaluator] = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.n_points,):
            raise GridError(
                f"expected {self.grid.n_points} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise GridError(f"non-finite value at node {bad}")

    @classmethod
    def closed_form(
        cls,
        grid: RadialGrid,
        func: Evaluator,
        derivatives: Mapping[int, Evaluator] | None = None,
    ) -> RadialFunction:
        """Sample func (of the native variable) and keep its derivatives."""
        var = grid.variable(grid.native)
        return cls(grid, func(var), dict(derivatives or {}))

    @property
    def source(self) -> str:
        return "closed-form" if self.derivatives else "sampled"

    def x_derivative(self, j: int) -> np.ndarray:
        """j-th derivative with respect to the log coordinate x."""
        if not 0 <= j <= MAX_DERIVATIVE_ORDER:
            raise GridError(f"derivative order {j} unsupported")
        if j == 0:
            return self.values
        if all(i in self.derivatives for i in range(1, j + 1)):
            var = self.grid.variable(self.grid.native)
            return sum(
                c * var**i * self.derivatives[i](var)
                for i, c in enumerate(STIRLING_SECOND[j], start=1)
            )
        d1, d2 = self.grid.difference_matrices
        if j == 1:
            return d1 @ self.values
        if j == 2:
            return d2 @ self.values
        if j == 3:
            return d1 @ (d2 @ self.values)
        return d2 @ (d2 @ self.values)

    def derivative(self, k: int, variable: str | None = None) -> np.ndarray:
        """k-th derivative with respect to t or r (default: the native variable)."""
        variable = variable or self.grid.native
        if not 0 <= k <= MAX_DERIVATIVE_ORDER:
            raise GridError(f"derivative order {k} unsupported")
        if k == 0:
            return self.values
        var = self.grid.variable(variable)
        if variable == self.grid.native and k in self.derivatives:
            return np.asarray(self.derivatives[k](var), dtype=float)
        # var d/dvar = (dx/dlog var) d/dx
        c = 1.0 / self.grid.log_scale(variable)
        scaled = sum(
            s * c**j * self.x_derivative(j)
            for j, s in enumerate(STIRLING_FIRST[k], start=1)
        )
        return scaled / var**k

    def with_values(self, values: np.ndarray) -> RadialFunction:
        """Same grid, new samples, no analytic derivatives."""
        return RadialFunction(self.grid, values)


def radius_value(r):
    """The smoothed radius sqrt(1 + r^2), valid at r = 0."""
    return np.sqrt(1.0 + np.square(r))


def smoothed_radius(grid: RadialGrid) -> RadialFunction:
    """rho = (1 + r^2)^(1/2) on the grid, with analytic derivatives."""
    if grid.native == "r":
        return RadialFunction.closed_form(
            grid,
            radius_value,
            {
                1: lambda r: r / radius_value(r),
                2: lambda r: radius_value(r) ** -3,
                3: lambda r: -3.0 * r * radius_value(r) ** -5,
                4: lambda r: (12.0 * r * r - 3.0) * radius_value(r) ** -7,
            },
        )
    return RadialFunction.closed_form(
        grid,
        lambda t: np.sqrt(1.0 + t),
        {
            1: lambda t: 0.5 * (1.0 + t) ** -0.5,
            2: lambda t: -0.25 * (1.0 + t) ** -1.5,
            3: lambda t: 0.375 * (1.0 + t) ** -2.5,
            4: lambda t: -0.9375 * (1.0 + t) ** -3.5,
        },
    )


@dataclass(frozen=True)
class WeightedNormReport:
    """Weighted C^k_beta norm and order-k Holder seminorm of one function."""

    beta: float
    k: int
    alpha: float
    ck_norm: float
    holder_seminorm: float
    per_order_sups: tuple[float, ...]
    attained_at_boundary: bool = False

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "k": self.k,
            "alpha": self.alpha,
            "ck_norm": self.ck_norm,
            "holder_seminorm": self.holder_seminorm,
            "per_order_sups": list(self.per_order_sups),
            "attained_at_boundary": self.attained_at_boundary,
        }


def weighted_ck_norm(
    f: RadialFunction,
    rho: RadialFunction,
    beta: float,
    k: int,
    alpha: float = 0.5,
) -> WeightedNormReport:
    """Weighted norm sum_j sup rho^(j-beta) |d^j f/dr^j| for j <= k.

    The Holder seminorm of the k-th derivative uses node pairs at distance
    below min(rho)/2, weighted by min(rho)^(-gamma) with gamma = beta-k-alpha.

    Args:
        f: The function to measure.
        rho: A radius function on the same grid.
        beta: Growth weight.
        k: Highest derivative order, 0..4.
        alpha: Holder exponent in (0, 1).
    """
    if not 0 <= k <= MAX_DERIVATIVE_ORDER:
        raise GridError(f"derivative order {k} unsupported")
    if not 0 < alpha < 1:
        raise GridError(f"Holder exponent must lie in (0, 1), got {alpha}")
    if f.grid is not rho.grid:
        raise GridError("function and radius live on different grids")

    radius = rho.values
    sups = []
    last = f.grid.n_points - 1
    at_boundary = False
    for j in range(k + 1):
        weighted = radius ** (j - beta) * np.abs(f.derivative(j, "r"))
        peak = int(np.argmax(weighted))
        sups.append(float(weighted[peak]))
        if peak == last and sups[-1] > 0:
            at_boundary = True

    seminorm = _holder_seminorm(f.grid.r, radius, f.derivative(k, "r"), beta - k - alpha, alpha)
    if at_boundary:
        logger.warning(
            "weighted norm (beta=%g, k=%d) attained at the outer grid boundary", beta, k
        )
    return WeightedNormReport(
        beta=float(beta),
        k=k,
        alpha=float(alpha),
        ck_norm=float(sum(sups)),
        holder_seminorm=seminorm,
        per_order_sups=tuple(sups),
        attained_at_boundary=at_boundary,
    )


def _holder_seminorm(
    r: np.ndarray, radius: np.ndarray, values: np.ndarray, gamma: float, alpha: float
) -> float:
    best = 0.0
    for offset in range(1, r.size):
        d = r[offset:] - r[:-offset]
        near = np.minimum(radius[offset:], radius[:-offset])
        mask = d < 0.5 * near
        if not mask.any():
            # pair distances only grow with the offset
            break
        ratio = (
            near[mask] ** (-gamma)
            * np.abs(values[offset:][mask] - values[:-offset][mask])
            / d[mask] ** alpha
        )
        best = max(best, float(ratio.max()))
    return best


def decay_order(f: RadialFunction, k: int, fit_window: tuple[float, float]) -> float:
    """Least-squares slope of log|d^k f/dr^k| against log r over a window of radii."""
    r_lo, r_hi = fit_window
    r = f.grid.r
    if not (r_lo < r_hi and r_lo >= r[0] * (1 - 1e-12) and r_hi <= r[-1] * (1 + 1e-12)):
        raise DecayError(f"fit window [{r_lo}, {r_hi}] not inside the grid")
    mask = (r >= r_lo) & (r <= r_hi)
    values = np.abs(f.derivative(k, "r"))[mask]
    radii = r[mask]
    if not np.any(values > 0):
        raise DecayError("no decay order: function vanishes on the fit window")
    keep = values > 0
    if keep.sum() < 3:
        raise DecayError("fit window too small for a decay fit")
    fit = linregress(np.log(radii[keep]), np.log(values[keep]))
    logger.debug("decay fit k=%d slope=%.6f rvalue=%.8f", k, fit.slope, fit.rvalue)
    return float(fit.slope)


def _bump(y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """psi(y) = exp(-1/y) for y > 0 (else 0) and its first two derivatives."""
    positive = y > 0
    safe = np.where(positive, y, 1.0)
    psi = np.where(positive, np.exp(-1.0 / safe), 0.0)
    d1 = psi / safe**2
    d2 = psi * (1.0 / safe**4 - 2.0 / safe**3)
    return psi, d1, d2


@dataclass(frozen=True)
class Cutoff:
    """Smooth step mu with mu = 1 for s <= shift - 1 and mu = 0 for s >= shift."""

    t_shift: float = 0.0

    def _parts(self, s):
        s = np.asarray(s, dtype=float) - self.t_shift
        a, a1, a2 = _bump(-s)
        b, b1, b2 = _bump(1.0 + s)
        # d/ds of a(s) = psi(-s) flips sign once
        return a, -a1, a2, b, b1, b2

    def __call__(self, s):
        a, _, _, b, _, _ = self._parts(s)
        return a / (a + b)

    def derivative(self, s, order: int = 1):
        if order not in (1, 2):
            raise GridError(f"cutoff derivative order {order} unsupported")
        a, a1, a2, b, b1, b2 = self._parts(s)
        total = a + b
        num = a1 * b - a * b1
        if order == 1:
            return num / total**2
        return ((a2 * b - a * b2) * total - 2.0 * num * (a1 + b1)) / total**3


def cutoff(t_shift: float = 0.0) -> Cutoff:
    """Cutoff evaluator shifted by t_shift."""
    return Cutoff(float(t_shift))
