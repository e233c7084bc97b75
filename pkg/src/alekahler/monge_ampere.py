"""U(m)-invariant complex Monge-Ampere solves on ALE backgrounds.

Everything is written in x = log t. A radial potential Phi has
w = Phi_x = t Phi' and Phi_xx = t (Phi' + t Phi''), so its volume ratio
against the flat metric is w^(m-1) w_x / t^m and the equation

    (omega_hat + dd^c phi)^m = e^f omega_hat^m

becomes (w^m)_x = e^f (w_hat^m)_x with w = w_hat + phi_x. The quadrature
solver integrates this directly; the continuity solver follows the
homotopy e^(s f), s in [0, 1], with Newton steps on the log form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.integrate import cumulative_simpson
from scipy.sparse.linalg import spsolve

from alekahler.calabi_metric import (
    PositivityError,
    RadialKahlerPotential,
    calabi_offset,
    fit_leading_coefficient,
)
from alekahler.flat_laplacian import (
    WeightRangeError,
    integral_to_boundary,
    sphere_volume,
    tail_integral,
)
from alekahler.radial_field import (
    DecayError,
    RadialFunction,
    RadialGrid,
    cutoff,
    decay_order,
    radius_value,
)

logger = logging.getLogger(__name__)

MAX_AMPLITUDE = 5.0
MIN_FLATTENING_RADIUS = 2.0
# fitted A / literal radial-integral A when the class is unchanged
MA_NORMALIZATION_FACTOR = 2.0
DEFAULT_NEWTON_TOLERANCE = 1e-10
MAX_NEWTON_ITERATIONS = 50
# converged once the residual is below tolerance and the potential moves less than this
STEP_TOLERANCE = 1e-9
# corrections this small relative to the iterate are rounding
ROUNDING_STEP = 1e-13
# quadratic convergence is checked once the residual is below this
QUADRATIC_RANGE = 1e-2
MAX_DAMPING_HALVINGS = 20
MAX_BISECTIONS = 8
# A is fitted over [t_max * lo, t_max]; psi decay over r in [r_max * a, r_max * b]
COEFFICIENT_WINDOW = 1e-3
PSI_DECAY_WINDOW = (1e-2, 1e-1)


class FlatteningError(ValueError):
    """Raised when a cutoff-glued potential is not positive."""


class NewtonDivergenceError(ArithmeticError):
    """Raised when the Newton iteration stops converging."""


class MAProblemError(ValueError):
    """Raised for right-hand sides outside the supported regime."""


@dataclass(frozen=True, eq=False)
class MAProblem:
    """(omega_hat + dd^c phi)^m = e^f omega_hat^m on a log-t grid.

    Attributes:
        m: Complex dimension.
        background: Positive background potential u_hat.
        f: Right-hand side on the background's grid.
        beta: Decay weight of f.
        group_order: |G|.
    """

    m: int
    background: RadialKahlerPotential
    f: RadialFunction
    beta: float
    group_order: int = 1

    def __post_init__(self) -> None:
        if self.f.grid is not self.background.grid:
            raise MAProblemError("f and the background live on different grids")
        if self.m != self.background.m:
            raise MAProblemError("dimension differs from the background's")
        if self.beta >= -2:
            raise WeightRangeError(f"beta={self.beta} is outside the weight range (beta < -2)")
        if np.max(np.abs(self.f.values)) > MAX_AMPLITUDE:
            raise MAProblemError(
                f"sup|f| exceeds {MAX_AMPLITUDE}: outside the perturbative regime"
            )
        self.background.check_positive("background metric not positive")

    @property
    def grid(self) -> RadialGrid:
        return self.f.grid

    @property
    def case_tag(self) -> str:
        n = 2 * self.m
        if -n < self.beta < -2:
            return "a"
        if self.beta < -n:
            return "b"
        raise WeightRangeError(f"borderline weight beta = -2m = {self.beta} is excluded")


@dataclass(frozen=True, eq=False)
class MASolution:
    """phi = A rho^(2-2m) + psi with solver diagnostics."""

    phi: RadialFunction
    A: float
    psi: RadialFunction
    case_tag: str
    newton_iterations: int
    final_residual: float
    positivity_margin: float
    class_constant: float
    method: str
    psi_decay: float | None = None
    residual_history: list[list[float]] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "A": self.A,
            "case": self.case_tag,
            "class_constant": self.class_constant,
            "final_residual": self.final_residual,
            "method": self.method,
            "newton_iterations": self.newton_iterations,
            "positivity_margin": self.positivity_margin,
            "psi_decay": self.psi_decay,
        }


def _background_arrays(background: RadialKahlerPotential) -> tuple[np.ndarray, np.ndarray]:
    """(w_hat, w_hat_x) = (t u', t (u' + t u''))."""
    t = background.grid.t
    return t * background.transverse_eigenvalue(), t * background.radial_eigenvalue()


def _root_difference(base: np.ndarray, delta: np.ndarray, m: int, t: np.ndarray) -> np.ndarray:
    """(base^m + delta)^(1/m) - base without cancellation."""
    total = base**m + delta
    if np.any(total <= 0):
        node = int(np.flatnonzero(total <= 0)[0])
        raise PositivityError("t^m (Phi')^m not positive", node, float(t[node]))
    root = total ** (1.0 / m)
    denominator = sum(root ** (m - 1 - j) * base**j for j in range(m))
    return delta / denominator


def ma_ratio(background: RadialKahlerPotential, phi: RadialFunction) -> RadialFunction:
    """Volume ratio (omega_hat + dd^c phi)^m / omega_hat^m on the grid."""
    m = background.m
    w_hat, w_hat_x = _background_arrays(background)
    transverse = 1.0 + phi.x_derivative(1) / w_hat
    radial = 1.0 + phi.x_derivative(2) / w_hat_x
    bad = (transverse <= 0) | (radial <= 0)
    if bad.any():
        node = int(np.flatnonzero(bad)[0])
        raise PositivityError("omega_hat + dd^c phi not positive", node, float(phi.grid.t[node]))
    return phi.with_values(transverse ** (m - 1) * radial)


def flatten(u0: RadialKahlerPotential, R: float) -> RadialKahlerPotential:
    """Glue u0 to the flat potential: u_hat = t + mu(rho - R) (u0 - t).

    rho = sqrt(1 + t) is the smoothed radius, so u_hat equals u0 for
    rho <= R - 1 and t for rho >= R. Eigenvalues are assembled from u0's and
    the cutoff's closed-form derivatives.

    Raises:
        FlatteningError: If R <= 2 or the glued metric is not positive.
    """
    if R <= MIN_FLATTENING_RADIUS:
        raise FlatteningError(f"R too small: need R > {MIN_FLATTENING_RADIUS}, got {R}")
    grid = u0.grid
    t = grid.t
    rho = radius_value(grid.r)
    mu = cutoff(0.0)
    # d rho/dt = 1/(2 rho), d^2 rho/dt^2 = -1/(4 rho^3)
    g = mu(rho - R)
    g1 = mu.derivative(rho - R, 1) / (2.0 * rho)
    g2 = mu.derivative(rho - R, 2) / (4.0 * rho**2) - mu.derivative(rho - R, 1) / (4.0 * rho**3)

    trans0, rad0 = u0.transverse_eigenvalue(), u0.radial_eigenvalue()
    deviation = u0.phi.values - t
    transverse = (1.0 - g) + g * trans0 + g1 * deviation
    radial = (
        (1.0 - g)
        + g * rad0
        + deviation * (g1 + t * g2)
        + 2.0 * t * g1 * (trans0 - 1.0)
    )
    values = t + g * deviation

    # the closed forms are tabulated on this grid only
    glued = RadialKahlerPotential(
        u0.m,
        RadialFunction(
            grid,
            values,
            {1: lambda _: transverse, 2: lambda _: (radial - transverse) / t},
        ),
        u0.class_constant,
        lambda _: (transverse, radial),
    )
    try:
        glued.check_positive("glued metric not positive")
    except PositivityError as e:
        raise FlatteningError(f"R too small: {e}") from e
    logger.info("flattened at R=%g, positivity margin %.4g", R, glued.positivity_margin())
    return glued


def ricci_potential(u: RadialKahlerPotential) -> RadialFunction:
    """f = -log[(u')^(m-1) (u' + t u'')], the Ricci potential against flat."""
    u.check_positive()
    transverse, radial = u.transverse_eigenvalue(), u.radial_eigenvalue()
    return RadialFunction(u.grid, -((u.m - 1) * np.log(transverse) + np.log(radial)))


def pipeline_problem(
    m: int, R: float, grid: RadialGrid, class_constant: float = 1.0, beta: float | None = None
) -> MAProblem:
    """Flatten the Calabi metric at R and pose the Ricci-flat equation on it."""
    background = flatten(RadialKahlerPotential.calabi(m, grid, class_constant), R)
    f = ricci_potential(background)
    # f is compactly supported, so any weight below -2m applies
    return MAProblem(m, background, f, beta if beta is not None else -2.0 * m - 2.0)


def total_potential(p: MAProblem, phi: RadialFunction) -> RadialKahlerPotential:
    """u_hat + phi, with eigenvalues from the background's closed forms plus phi's."""
    w_hat, w_hat_x = _background_arrays(p.background)
    t = p.grid.t
    transverse = (w_hat + phi.x_derivative(1)) / t
    radial = (w_hat_x + phi.x_derivative(2)) / t
    return RadialKahlerPotential(
        p.m,
        RadialFunction(p.grid, p.background.phi.values + phi.values),
        p.background.class_constant,
        lambda _: (transverse, radial),
    )


def _fit_window_mask(grid: RadialGrid) -> np.ndarray:
    return grid.t >= grid.t_max * COEFFICIENT_WINDOW


def _solution_potential(
    grid: RadialGrid, values: np.ndarray, phi_x: np.ndarray, phi_xx: np.ndarray
) -> RadialFunction:
    """phi with its own x-derivatives attached.

    Stencils applied to the stored values would difference the constant
    phi(0), whose rounding swamps w_hat_x ~ t^m near the origin.
    """
    t = grid.t
    return RadialFunction(
        grid,
        values,
        {1: lambda _: phi_x / t, 2: lambda _: (phi_xx - phi_x) / t**2},
    )


def _finish(
    p: MAProblem,
    phi: RadialFunction,
    class_constant: float,
    method: str,
    newton_iterations: int = 0,
    final_residual: float | None = None,
    history: list[list[float]] | None = None,
) -> MASolution:
    grid = p.grid
    phi_values = phi.values
    case = p.case_tag
    if case == "b" and np.any(phi_values):
        mask = _fit_window_mask(grid)
        _, A = fit_leading_coefficient(grid.t[mask], phi_values[mask], p.m)
    else:
        A = 0.0
    psi = RadialFunction(grid, phi_values - A * (1.0 + grid.t) ** (1.0 - p.m))

    ratio = ma_ratio(p.background, phi)
    log_ratio = np.log(ratio.values)
    discrete = np.abs(log_ratio - p.f.values)[2:-2]
    if final_residual is None:
        final_residual = float(discrete.max())
    total = total_potential(p, phi)
    margin = total.positivity_margin()

    psi_decay = None
    r_max = grid.r[-1]
    window = (r_max * PSI_DECAY_WINDOW[0], r_max * PSI_DECAY_WINDOW[1])
    if np.any(psi.values) and window[0] >= grid.r[0]:
        try:
            psi_decay = decay_order(psi, 0, window)
        except DecayError:
            psi_decay = None
    logger.info(
        "%s solve m=%d: A=%.12g residual=%.3e margin=%.4g", method, p.m, A, final_residual, margin
    )
    return MASolution(
        phi=phi,
        A=float(A),
        psi=psi,
        case_tag=case,
        newton_iterations=newton_iterations,
        final_residual=float(final_residual),
        positivity_margin=float(margin),
        class_constant=float(class_constant),
        method=method,
        psi_decay=psi_decay,
        residual_history=history or [],
    )


def _check_class(p: MAProblem, class_constant: float) -> None:
    if class_constant < 0:
        raise MAProblemError(f"class constant must be nonnegative, got {class_constant}")


def solve_ma_quadrature(p: MAProblem, class_constant: float) -> MASolution:
    """Exact integration of (w^m)_x = e^f (w_hat^m)_x.

    t^m (Phi')^m = w^m starts from class_constant at t -> 0; below the first
    node f is taken constant. phi_x = w - w_hat is integrated inward from the
    decay condition phi_x + (m-1) phi = 0 at the outer node.
    """
    _check_class(p, class_constant)
    m, grid = p.m, p.grid
    x = grid.x
    w_hat, w_hat_x = _background_arrays(p.background)
    c_hat = p.background.class_constant
    f = p.f.values

    flux = m * w_hat ** (m - 1) * w_hat_x
    integrand = np.expm1(f) * flux
    if p.case_tag == "b" and np.any(integrand):
        # expm1(f) (w_hat^m)_x ~ t^(m + beta/2) beyond t_max
        tail = tail_integral(integrand[-1], m + p.beta / 2.0)
        logger.debug("quadrature tail beyond t_max: %.3e", tail)
    inner = (class_constant - c_hat) + np.expm1(f[0]) * (w_hat[0] ** m - c_hat)
    delta = inner + cumulative_simpson(integrand, x=x, initial=0)
    phi_x = _root_difference(w_hat, delta, m, grid.t)

    outer = phi_x[-1] / (1.0 - m)
    phi_values = outer - integral_to_boundary(phi_x, grid.h)
    d1, _ = grid.difference_matrices
    phi = _solution_potential(grid, phi_values, phi_x, d1 @ phi_x)
    return _finish(p, phi, class_constant, "quadrature")


class ContinuitySystem:
    """Discrete radial Monge-Ampere residual and Jacobian at homotopy time s.

    The class constant moves with s as c_s = c_hat + s (c - c_hat). That move
    is carried exactly by the reference slope w_ref = (w_hat^m + c_s - c_hat)^(1/m),
    which has the background's volume form, and Newton solves for the rest
    chi = phi - P_s, where P_s is the decaying potential of w_ref - w_hat.
    The unknowns are z = (chi_0, chi_1 - chi_0, ..., chi_{N-1} - chi_0), so
    the stencils never difference the constant chi_0.

    Interior rows: (m-1) log(w / w_ref) + log(w_x / w_ref_x) - s f with
    w = w_ref + chi_x, which equals the log volume ratio against the
    background. Row 0 fixes chi_x from the class constant; the last row
    imposes phi_x + (m-1) phi = 0.
    """

    def __init__(self, p: MAProblem, class_constant: float, s: float):
        self.p = p
        self.m = p.m
        self.s = s
        grid = p.grid
        m = self.m
        self.d1, self.d2 = grid.difference_matrices
        w_hat, w_hat_x = _background_arrays(p.background)
        c_hat = p.background.class_constant
        shift = s * (class_constant - c_hat)
        if shift:
            self.class_slope = _root_difference(w_hat, np.full_like(w_hat, shift), m, grid.t)
        else:
            self.class_slope = np.zeros_like(w_hat)
        self.w_ref = w_hat + self.class_slope
        # w_ref^(m-1) w_ref_x = w_hat^(m-1) w_hat_x
        self.w_ref_x = w_hat_x * (w_hat / self.w_ref) ** (m - 1)
        self.class_curvature = self.w_ref_x - w_hat_x
        self.class_potential = self.class_slope[-1] / (1.0 - m) - integral_to_boundary(
            self.class_slope, grid.h
        )
        excess = np.expm1(s * p.f.values[0]) * (w_hat[0] ** m - c_hat)
        self.inner_slope = float(
            _root_difference(self.w_ref[:1], np.array([excess]), m, grid.t[:1])[0]
        )

    @staticmethod
    def _offsets(z: np.ndarray) -> np.ndarray:
        offsets = z.copy()
        offsets[0] = 0.0
        return offsets

    def slopes(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(chi_x, chi_xx) from the stencils."""
        offsets = self._offsets(z)
        return self.d1 @ offsets, self.d2 @ offsets

    def potential(self, z: np.ndarray) -> RadialFunction:
        """phi = P_s + chi with its x-derivatives."""
        chi_x, chi_xx = self.slopes(z)
        values = self.class_potential + (z[0] + self._offsets(z))
        return _solution_potential(
            self.p.grid, values, self.class_slope + chi_x, self.class_curvature + chi_xx
        )

    def is_admissible(self, z: np.ndarray) -> bool:
        chi_x, chi_xx = self.slopes(z)
        inner = slice(1, -1)
        return bool(
            np.all(self.w_ref[inner] + chi_x[inner] > 0)
            and np.all(self.w_ref_x[inner] + chi_xx[inner] > 0)
        )

    def residual(self, z: np.ndarray) -> np.ndarray:
        chi_x, chi_xx = self.slopes(z)
        inner = slice(1, -1)
        transverse = chi_x[inner] / self.w_ref[inner]
        radial = chi_xx[inner] / self.w_ref_x[inner]
        bad = (transverse <= -1.0) | (radial <= -1.0)
        if bad.any():
            node = int(np.flatnonzero(bad)[0]) + 1
            raise PositivityError("Newton iterate not positive", node, float(self.p.grid.t[node]))
        res = np.empty_like(z)
        res[inner] = (
            (self.m - 1) * np.log1p(transverse)
            + np.log1p(radial)
            - self.s * self.p.f.values[inner]
        )
        res[0] = chi_x[0] - self.inner_slope
        res[-1] = chi_x[-1] + (self.m - 1) * (z[0] + z[-1])
        return res

    def jacobian(self, z: np.ndarray) -> sparse.csr_matrix:
        """Linearized residual: the radial Laplacian of the current metric in the interior."""
        n = z.size
        chi_x, chi_xx = self.slopes(z)
        inner = slice(1, -1)
        a = np.ones(n)
        b = np.zeros(n)
        a[inner] = (self.m - 1) / (self.w_ref[inner] + chi_x[inner])
        b[inner] = 1.0 / (self.w_ref_x[inner] + chi_xx[inner])
        operator = sparse.diags(a) @ self.d1 + sparse.diags(b) @ self.d2
        # column 0 holds chi_0, which only the outer row sees
        keep = np.ones(n)
        keep[0] = 0.0
        outer = sparse.coo_matrix(
            ([self.m - 1.0, self.m - 1.0], ([n - 1, n - 1], [0, n - 1])), shape=(n, n)
        )
        return (operator @ sparse.diags(keep) + outer).tocsr()


def _newton(
    system: ContinuitySystem,
    z: np.ndarray,
    tolerance: float,
) -> tuple[np.ndarray, list[float]]:
    res = system.residual(z)
    norm = float(np.max(np.abs(res)))
    history = [norm]
    increases = 0
    for _ in range(MAX_NEWTON_ITERATIONS):
        step = spsolve(system.jacobian(z).tocsc(), -res)
        size = float(np.max(np.abs(step)))
        if norm <= tolerance and size <= STEP_TOLERANCE:
            return z, history
        if size <= ROUNDING_STEP * (1.0 + float(np.max(np.abs(z)))):
            logger.warning(
                "Newton correction at rounding level with residual %.3e at s=%.4f",
                norm,
                system.s,
            )
            return z, history
        damping = 1.0
        for _ in range(MAX_DAMPING_HALVINGS):
            trial = z + damping * step
            if system.is_admissible(trial):
                break
            damping *= 0.5
        else:
            raise PositivityError(
                "positivity lost in every damped Newton step", 0, float(system.p.grid.t[0])
            )
        if damping < 1.0:
            logger.debug("Newton step damped to %.3g", damping)
        z = trial
        res = system.residual(z)
        new_norm = float(np.max(np.abs(res)))
        history.append(new_norm)
        logger.debug("s=%.4f Newton residual %.3e", system.s, new_norm)
        increases = increases + 1 if new_norm > norm else 0
        if increases >= 2:
            raise NewtonDivergenceError(
                f"Newton residual increased twice at s={system.s:.4f}; try more steps"
            )
        norm = new_norm
    raise NewtonDivergenceError(
        f"Newton did not converge in {MAX_NEWTON_ITERATIONS} iterations at s={system.s:.4f}"
    )


def solve_ma_continuity(
    p: MAProblem,
    class_constant: float,
    steps: int,
    tolerance: float = DEFAULT_NEWTON_TOLERANCE,
) -> MASolution:
    """Continuity-method solve of (omega_hat + dd^c phi)^m = e^(s f) omega_hat^m.

    s marches from 0 (where phi = 0 solves the equation in the background
    class) to 1 in `steps` uniform increments, moving the class constant
    along with it. Every Newton solve starts from the previous step's
    solution, which is positive. A failed increment is bisected up to
    MAX_BISECTIONS times.
    """
    _check_class(p, class_constant)
    if steps < 1:
        raise MAProblemError(f"need at least one homotopy step, got {steps}")
    z = np.zeros(p.grid.n_points)
    s = 0.0
    increment = 1.0 / steps
    iterations = 0
    history: list[list[float]] = []
    bisections = 0
    system = ContinuitySystem(p, class_constant, s)
    while s < 1.0 - 1e-15:
        target = min(1.0, s + increment)
        try:
            trial_system = ContinuitySystem(p, class_constant, target)
            candidate, steps_history = _newton(trial_system, z, tolerance)
        except (NewtonDivergenceError, PositivityError) as e:
            bisections += 1
            if bisections > MAX_BISECTIONS:
                raise NewtonDivergenceError(
                    f"continuity stalled at s={s:.4f} after {MAX_BISECTIONS} bisections: {e}"
                ) from e
            increment *= 0.5
            logger.info("bisecting homotopy step at s=%.4f to %.4g", s, increment)
            continue
        z, system, s = candidate, trial_system, target
        iterations += len(steps_history) - 1
        history.append(steps_history)
    final = history[-1][-1] if history else 0.0
    logger.info("continuity solve: %d Newton iterations over %d steps", iterations, len(history))
    return _finish(
        p, system.potential(z), class_constant, "continuity", iterations, final, history
    )


def newton_contraction(history: list[list[float]], tolerance: float) -> float:
    """Largest r_(k+1) / r_k^2 over Newton steps with r_k < 1e-2.

    Steps landing at or below the tolerance are skipped: there the residual
    is set by rounding rather than by the iteration.
    """
    worst = 0.0
    for residuals in history:
        for before, after in zip(residuals, residuals[1:]):
            if 0.0 < before < QUADRATIC_RANGE and after > tolerance:
                worst = max(worst, after / before**2)
    return worst


def formula_coefficient(p: MAProblem) -> float:
    """Leading coefficient from the literal radial-integral formula.

    A_formula = |G| / ((m-1) Omega_{2m-1}) int_X (1 - e^f) dV_hat, with
    dV_hat = density Omega_{2m-1} r^(2m-1) dr / |G| and r^(2m-1) dr = t^m dx / 2.
    """
    m = p.m
    if p.beta >= -2 * m:
        raise WeightRangeError(f"divergent integral: weight beta={p.beta} >= -2m")
    omega = sphere_volume(2 * m)
    density = p.background.volume_density()
    integrand = -np.expm1(p.f.values) * density * p.grid.t**m / 2.0
    if np.any(integrand):
        radial = cumulative_simpson(integrand, x=p.grid.x, initial=0)[-1]
        # expm1(f) t^m ~ t^(m + beta/2)
        radial += tail_integral(integrand[-1], m + p.beta / 2.0)
    else:
        radial = 0.0
    volume = omega / p.group_order * radial
    return p.group_order / ((m - 1) * omega) * volume


def leading_coefficient_ma(p: MAProblem, solution: MASolution) -> tuple[float, float]:
    """(A_formula, A_fitted) for the decomposition phi = A rho^(2-2m) + psi."""
    return formula_coefficient(p), solution.A


def predicted_leading_coefficient(p: MAProblem, class_constant: float) -> float:
    """A expected from the literal formula and the class change.

    With an unchanged class the fitted coefficient is MA_NORMALIZATION_FACTOR
    times the formula value; moving the class constant from c_hat to c adds
    -(c - c_hat) / (m(m-1)).
    """
    formula = formula_coefficient(p)
    shift = class_constant - p.background.class_constant
    return MA_NORMALIZATION_FACTOR * formula - shift / (p.m * (p.m - 1))


def calabi_deviation(p: MAProblem, solution: MASolution) -> float:
    """sup |(u_hat + phi) - Calabi| over the grid, for pipeline problems."""
    t = p.grid.t
    total = p.background.phi.values + solution.phi.values
    target = t + calabi_offset(p.m, t, solution.class_constant)
    return float(np.max(np.abs(total - target)))

