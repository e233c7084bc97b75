"""Weighted-decay Poisson theory for radial data on R^n/G.

The Laplacian is the geometer's d*d, Delta u = -(u'' + (n-1) u'/r), whose
Green kernel is positive. Decaying solutions of Delta u = f come from the
radial Green representation

    u(r) = int_r^inf s^(1-n) F(s) ds,   F(s) = int_0^s f(sigma) sigma^(n-1) dsigma,

evaluated on a log-r grid with Simpson quadrature and power-law tails.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.integrate import cumulative_simpson
from scipy.sparse.linalg import spsolve
from scipy.special import gamma as gamma_function

from alekahler.radial_field import (
    DecayError,
    GridError,
    RadialFunction,
    RadialGrid,
    decay_order,
    radius_value,
    smoothed_radius,
    weighted_ck_norm,
)
from alekahler.source_terms import delta_rho_power

logger = logging.getLogger(__name__)

# decay fits use [r_max * lo, r_max * hi]
DECAY_WINDOW_FRACTIONS = (1e-4, 1e-2)
# remainders below this fraction of u on the fit window have no measurable decay
REMAINDER_FLOOR = 1e-9


class WeightRangeError(ValueError):
    """Raised when a weight lies outside the range a statement covers."""


class QuadratureError(ArithmeticError):
    """Raised when a radial integral cannot be closed off at infinity."""


def sphere_volume(n: int) -> float:
    """Volume of the unit (n-1)-sphere, 2 pi^(n/2) / Gamma(n/2)."""
    return float(2.0 * np.pi ** (n / 2.0) / gamma_function(n / 2.0))


@dataclass(frozen=True, eq=False)
class PoissonProblem:
    """Delta u = f on R^n/G for radial f of decay weight beta."""

    n: int
    f: RadialFunction
    beta: float
    group_order: int = 1

    def __post_init__(self) -> None:
        if self.n <= 2:
            raise WeightRangeError(f"real dimension must exceed 2, got {self.n}")
        if self.group_order < 1:
            raise WeightRangeError(f"group order must be positive, got {self.group_order}")
        if self.beta >= -2:
            raise WeightRangeError(
                f"beta={self.beta} is outside the theorem's weight range (beta < -2)"
            )
        if self.f.grid.coordinate != "log_r":
            raise GridError("Poisson problems live on log-r grids")

    @property
    def grid(self) -> RadialGrid:
        return self.f.grid

    @property
    def case_tag(self) -> str:
        if -self.n < self.beta < -2:
            return "a"
        if self.beta < -self.n:
            return "b"
        raise WeightRangeError(f"borderline weight beta = -n = {self.beta} is excluded")


@dataclass(frozen=True, eq=False)
class PoissonSolution:
    """u = A rho^(2-n) + v, with measured decay orders of u and v."""

    u: RadialFunction
    A: float
    v: RadialFunction
    case_tag: str
    measured_decay_u: float | None
    measured_decay_v: float | None
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "A": self.A,
            "case": self.case_tag,
            "measured_decay_u": self.measured_decay_u,
            "measured_decay_v": self.measured_decay_v,
            **self.extras,
        }


def laplacian(u: RadialFunction, n: int) -> RadialFunction:
    """Delta u = -(u'' + (n-1) u'/r) with derivatives in the geometric radius."""
    r = u.grid.r
    return u.with_values(-(u.derivative(2, "r") + (n - 1) * u.derivative(1, "r") / r))


def tail_integral(last: float, order: float) -> float:
    """int_{x_N}^inf last * exp(order (x - x_N)) dx = last / (-order).

    On a log-r grid this closes off an integrand continued as the power law
    r^order beyond the outer node. The order comes from the known weight of
    the integrand, never from the sampled values, which may be cancelled
    down to rounding near the boundary.
    """
    if order >= 0:
        raise QuadratureError(f"integrand of order {order:.3g} does not decay at infinity")
    return float(last / (-order))


def integral_to_boundary(values: np.ndarray, h: float) -> np.ndarray:
    """int_{x_i}^{x_N} of a node series on a uniform grid, for every node i."""
    # accumulating from the boundary keeps small tails free of cancellation
    return cumulative_simpson(values[::-1], dx=h, initial=0)[::-1]


def _inner_moment(grid: RadialGrid, f: np.ndarray, n: int) -> np.ndarray:
    """F(r) = int_0^r f s^(n-1) ds with f taken constant below the first node."""
    r, x = grid.r, grid.x
    integrand = f * r**n
    return integrand[0] / n + cumulative_simpson(integrand, x=x, initial=0)


def _outer_moment(grid: RadialGrid, f: np.ndarray, n: int, beta: float) -> np.ndarray:
    """int_r^inf f s^(n-1) ds for f of weight beta < -n."""
    integrand = f * grid.r**n
    tail = tail_integral(integrand[-1], beta + n)
    return tail + integral_to_boundary(integrand, grid.h)


def _green_outer(grid: RadialGrid, moment: np.ndarray, n: int, order: float) -> np.ndarray:
    """int_r^inf s^(1-n) moment(s) ds, with s^(2-n) moment ~ r^order at infinity."""
    integrand = grid.r ** (2 - n) * moment
    tail = tail_integral(integrand[-1], order)
    return tail + integral_to_boundary(integrand, grid.h)


def total_moment(grid: RadialGrid, f: np.ndarray, n: int, beta: float) -> float:
    """int_0^inf f s^(n-1) ds over the grid plus inner and outer closures.

    f has weight beta, so the tail of f s^n in log r decays with order beta + n.
    """
    integrand = f * grid.r**n
    return float(_inner_moment(grid, f, n)[-1] + tail_integral(integrand[-1], beta + n))


def green_solve(
    grid: RadialGrid, f: np.ndarray, n: int, beta: float, zero_mean: bool = False
) -> np.ndarray:
    """Decaying radial solution of Delta u = f for f of weight beta.

    With zero_mean the moment beyond r = 1 is taken from the outer tail, which
    keeps the fast decay r^(beta+2) of u when int f dV = 0.
    """
    if not np.any(f):
        return np.zeros_like(f)
    moment = _inner_moment(grid, f, n)
    if zero_mean:
        outer = grid.r >= 1.0
        moment = np.where(outer, -_outer_moment(grid, f, n, beta), moment)
        order = beta + 2.0
    else:
        # growing moments (beta > -n) give r^(beta+2), bounded ones r^(2-n)
        order = max(beta + 2.0, 2.0 - n)
    return _green_outer(grid, moment, n, order)


def leading_coefficient(p: PoissonProblem) -> float:
    """A = |G| / ((n-2) Omega_{n-1}) * int_X f dV.

    The volume of R^n/G carries Omega_{n-1} r^(n-1) dr / |G|, so in the radial
    reduction A = int_0^inf f s^(n-1) ds / (n-2).
    """
    if p.beta >= -p.n:
        raise WeightRangeError(f"f not integrable: weight β ≥ −n (beta={p.beta})")
    omega = sphere_volume(p.n)
    integral = omega / p.group_order * total_moment(p.grid, p.f.values, p.n, p.beta)
    return p.group_order / ((p.n - 2) * omega) * integral


def _decay_window(grid: RadialGrid) -> tuple[float, float]:
    r_max = grid.r[-1]
    return (r_max * DECAY_WINDOW_FRACTIONS[0], r_max * DECAY_WINDOW_FRACTIONS[1])


def _measured_decay(func: RadialFunction, reference: RadialFunction | None = None) -> float | None:
    window = _decay_window(func.grid)
    r = func.grid.r
    mask = (r >= window[0]) & (r <= window[1])
    size = np.max(np.abs(func.values[mask]))
    if reference is not None:
        if size <= REMAINDER_FLOOR * np.max(np.abs(reference.values[mask])):
            return None
    try:
        return decay_order(func, 0, window)
    except DecayError:
        return None


def solve_poisson(p: PoissonProblem) -> PoissonSolution:
    """Green-representation solve with the case (a)/(b) split.

    Case "a" (-n < beta < -2): u decays like r^(beta+2) and A = 0.
    Case "b" (beta < -n): u = A rho^(2-n) + v, v obtained by solving with
    right-hand side f - A Delta(rho^(2-n)), which has zero mean.
    """
    case = p.case_tag
    grid = p.grid
    f = p.f.values
    u = RadialFunction(grid, green_solve(grid, f, p.n, p.beta))
    if not np.any(f):
        zero = RadialFunction(grid, np.zeros_like(f))
        return PoissonSolution(u, 0.0, zero, case, None, None)

    if case == "a":
        A = 0.0
        v = u
    else:
        A = leading_coefficient(p)
        corrected = f - A * delta_rho_power(grid.r, p.n)[0]
        # Delta(rho^(2-n)) has weight -n-2, so the corrected source decays no faster
        weight = max(p.beta, -p.n - 2.0)
        v = RadialFunction(grid, green_solve(grid, corrected, p.n, weight, zero_mean=True))

    decay_u = _measured_decay(u)
    decay_v = decay_u if case == "a" else _measured_decay(v, reference=u)
    logger.info(
        "poisson n=%d case=%s A=%.12g decay_u=%s decay_v=%s", p.n, case, A, decay_u, decay_v
    )
    return PoissonSolution(u, A, v, case, decay_u, decay_v)


def solve_poisson_bvp(p: PoissonProblem) -> RadialFunction:
    """Independent solve of Delta u = f as a sparse boundary-value problem.

    In x = log r the equation reads u_xx + (n-2) u_x = -r^2 f. The inner row
    imposes u_x = -r^2 f / n (regularity at the origin) and the outer row the
    Robin condition u_x = q u with q the expected decay order of u.
    """
    grid = p.grid
    if not np.any(p.f.values):
        return RadialFunction(grid, np.zeros(grid.n_points))
    q = 2.0 - p.n if p.case_tag == "b" else p.beta + 2.0
    d1, d2 = grid.difference_matrices
    r = grid.r
    operator = (d2 + (p.n - 2) * d1).tolil()
    rhs = -(r**2) * p.f.values
    operator[0, :] = d1[0, :].toarray().ravel()
    rhs[0] = -(r[0] ** 2) * p.f.values[0] / p.n
    last = grid.n_points - 1
    outer = d1[last, :].toarray().ravel()
    outer[last] -= q
    operator[last, :] = outer
    rhs[last] = 0.0
    values = spsolve(sparse.csr_matrix(operator), rhs)
    return RadialFunction(grid, values)


def delta_radius_identity(n: int, group_order: int, grid: RadialGrid) -> tuple[float, float]:
    """(int_X Delta(rho^(2-n)) dV, (n-2) Omega_{n-1} / |G|).

    The Laplacian is taken from closed-form derivatives of rho^(2-n).
    """
    if n <= 2:
        raise WeightRangeError(f"real dimension must exceed 2, got {n}")
    if grid.coordinate != "log_r":
        raise GridError("identity quadrature needs a log-r grid")
    power = (2.0 - n) / 2.0
    rho_power = RadialFunction.closed_form(
        grid,
        lambda r: (1.0 + r * r) ** power,
        {
            1: lambda r: (2.0 - n) * r * (1.0 + r * r) ** (power - 1.0),
            2: lambda r: (2.0 - n)
            * ((1.0 + r * r) ** (power - 1.0) - n * r * r * (1.0 + r * r) ** (power - 2.0)),
        },
    )
    delta = laplacian(rho_power, n)
    omega = sphere_volume(n)
    computed = omega / group_order * total_moment(grid, delta.values, n, -n - 2.0)
    return computed, (n - 2) * omega / group_order


def symmetry_residual(
    u: RadialFunction,
    v: RadialFunction,
    n: int,
    beta: float,
    gamma: float,
) -> tuple[float, float]:
    """Integration-by-parts check int (u Delta v - v Delta u) dV = 0.

    Args:
        u: Function of weight beta.
        v: Function of weight gamma, on the same grid.
        n: Real dimension.
        beta: Weight of u.
        gamma: Weight of v; beta + gamma < 2 - n is required.

    Returns:
        (|int (u Delta v - v Delta u) r^(n-1) dr|, R^(n-1) (u v' - v u') at the
        outer node R).
    """
    if beta + gamma >= 2 - n:
        raise WeightRangeError(
            f"identity needs beta + gamma < 2 - n, got {beta + gamma} >= {2 - n}"
        )
    if u.grid is not v.grid:
        raise GridError("u and v live on different grids")
    grid = u.grid
    integrand = u.values * laplacian(v, n).values - v.values * laplacian(u, n).values
    if not np.any(integrand):
        residual = 0.0
    else:
        residual = abs(total_moment(grid, integrand, n, beta + gamma - 2.0))
    big_r = grid.r[-1]
    boundary = big_r ** (n - 1) * (
        u.values[-1] * v.derivative(1, "r")[-1] - v.values[-1] * u.derivative(1, "r")[-1]
    )
    return residual, float(boundary)


def poisson_bound_ratio(p: PoissonProblem, solution: PoissonSolution | None = None) -> float:
    """||u||_{C^0_{beta+2}} / ||f||_{C^0_beta} for the decaying solution."""
    solution = solution or solve_poisson(p)
    rho = smoothed_radius(p.grid)
    f_norm = weighted_ck_norm(p.f, rho, p.beta, 0).ck_norm
    if f_norm == 0:
        return 0.0
    u_norm = weighted_ck_norm(solution.u, rho, p.beta + 2, 0).ck_norm
    return u_norm / f_norm


def leading_profile(solution: PoissonSolution, n: int) -> np.ndarray:
    """A rho^(2-n) on the solution grid."""
    return solution.A * radius_value(solution.u.grid.r) ** (2 - n)
