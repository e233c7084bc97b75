"""Pointwise algebra of real (1,1)-forms against a background Kahler form.

A form is stored as the Hermitian matrix of its components in a frame where
the background form is the identity, so all wedge products reduce to
symmetric functions of the eigenvalues. Identities are returned as residuals;
tolerances belong to the caller.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

HERMITIAN_TOLERANCE = 1e-10
TRACE_TOLERANCE = 1e-9
DEFAULT_STEP = 0.5


class HermitianFormError(ValueError):
    """Raised for matrices that are not Hermitian or have the wrong shape."""


class IdentityHypothesisError(ValueError):
    """Raised when an identity is queried outside its hypothesis."""


@dataclass(frozen=True, eq=False)
class HermitianForm:
    """A real (1,1)-form at a point, as an m x m Hermitian matrix."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise HermitianFormError(f"expected a square matrix, got shape {a.shape}")
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(a - a.conj().T)) > HERMITIAN_TOLERANCE * scale:
            raise HermitianFormError("matrix is not Hermitian")
        object.__setattr__(self, "entries", 0.5 * (a + a.conj().T))

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, m: int) -> HermitianForm:
        return cls(np.eye(m))

    @classmethod
    def diagonal(cls, values) -> HermitianForm:
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def random(
        cls, m: int, rng: np.random.Generator, trace_free: bool = False
    ) -> HermitianForm:
        """Gaussian Hermitian sample, optionally projected to trace zero."""
        x = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        a = 0.5 * (x + x.conj().T)
        if trace_free:
            a -= np.trace(a).real / m * np.eye(m)
        return cls(a)


def omega_eigenvalues(z: HermitianForm) -> np.ndarray:
    """Eigenvalues relative to the background form, in descending order."""
    return np.linalg.eigvalsh(z.entries)[::-1]


def elementary_symmetric(eigenvalues: np.ndarray, k: int) -> float:
    """e_k of the given values; e_0 = 1."""
    coeffs = np.poly(eigenvalues)
    return float(((-1) ** k * coeffs[k]).real)


def wedge_power_ratio(z: HermitianForm, k: int) -> float:
    """zeta^k ^ omega^(m-k) / omega^m = e_k(lambda) / C(m, k)."""
    if not 0 <= k <= z.m:
        raise HermitianFormError(f"wedge power must lie in [0, {z.m}], got {k}")
    return elementary_symmetric(omega_eigenvalues(z), k) / comb(z.m, k, exact=True)


def form_norm_squared(z: HermitianForm) -> float:
    """|zeta|^2 = 2 * sum lambda_i^2."""
    lam = omega_eigenvalues(z)
    return float(2.0 * np.dot(lam, lam))


def trace_identity_residual(z: HermitianForm, laplacian_value: float) -> float:
    """|e_1 + Delta u| for z = dd^c u at a point; zero when the identity holds."""
    return abs(float(np.trace(z.entries).real) + laplacian_value)


def primitive_square_identity_residual(
    z: HermitianForm, trace_tolerance: float = TRACE_TOLERANCE
) -> float:
    """Residual of the primitive-form identity for zeta^2 ^ omega^(m-2).

    Args:
        z: A trace-free form.
        trace_tolerance: Allowed |e_1| relative to the form's size.

    Returns:
        |e_2/C(m,2) + |zeta|^2 / (2m(m-1))|.

    Raises:
        IdentityHypothesisError: If the trace is not zero.
    """
    if z.m < 2:
        raise IdentityHypothesisError("identity needs complex dimension at least 2")
    lam = omega_eigenvalues(z)
    scale = max(1.0, float(np.max(np.abs(lam))))
    if abs(lam.sum()) > trace_tolerance * scale:
        raise IdentityHypothesisError("hypothesis ζ∧ω^{m−1}=0 violated")
    m = z.m
    return abs(wedge_power_ratio(z, 2) + form_norm_squared(z) / (2 * m * (m - 1)))


def is_positive(z: HermitianForm) -> bool:
    return bool(np.all(omega_eigenvalues(z) > 0))


def _real_hessian(u: Callable[[np.ndarray], float], z0, step: float) -> np.ndarray:
    """Central-difference Hessian of u in real coordinates (x_1..x_m, y_1..y_m)."""
    z0 = np.asarray(z0, dtype=complex)
    m = z0.size
    base = np.concatenate([z0.real, z0.imag])

    def f(point):
        return float(u(point[:m] + 1j * point[m:]))

    n = 2 * m
    hess = np.zeros((n, n))
    centre = f(base)
    basis = np.eye(n) * step
    for a in range(n):
        hess[a, a] = (f(base + basis[a]) - 2.0 * centre + f(base - basis[a])) / step**2
        for b in range(a + 1, n):
            mixed = (
                f(base + basis[a] + basis[b])
                - f(base + basis[a] - basis[b])
                - f(base - basis[a] + basis[b])
                + f(base - basis[a] - basis[b])
            ) / (4.0 * step**2)
            hess[a, b] = hess[b, a] = mixed
    return hess


def flat_complex_hessian(
    u: Callable[[np.ndarray], float], z0, step: float = DEFAULT_STEP
) -> HermitianForm:
    """dd^c u at z0 relative to dd^c|z|^2, by central differences.

    Entry (j, k) is d_j dbar_k u = (u_xjxk + u_yjyk + i(u_xjyk - u_yjxk)) / 4.
    """
    hess = _real_hessian(u, z0, step)
    m = hess.shape[0] // 2
    xx, yy = hess[:m, :m], hess[m:, m:]
    xy = hess[:m, m:]
    return HermitianForm(0.25 * (xx + yy + 1j * (xy - xy.T)))


def flat_laplacian_value(
    u: Callable[[np.ndarray], float], z0, step: float = DEFAULT_STEP
) -> float:
    """Geometer Laplacian d*d u at z0 for the metric of dd^c|z|^2.

    Equal to minus a quarter of the Euclidean Laplacian in real coordinates.
    """
    z0 = np.asarray(z0, dtype=complex)
    m = z0.size
    base = np.concatenate([z0.real, z0.imag])

    def f(point):
        return float(u(point[:m] + 1j * point[m:]))

    centre = f(base)
    total = 0.0
    for a in range(2 * m):
        e = np.zeros(2 * m)
        e[a] = step
        total += (f(base + e) - 2.0 * centre + f(base - e)) / step**2
    return -0.25 * total
