"""Rate functions and limiting log-moment generating functions.

Conventions: for a centered Gaussian family with covariance scaled by
``alpha^2 Q`` the rate is ``||Q^{-1/2} x||^2 / alpha^2`` on the range of
``Q^{1/2}`` and ``+inf`` elsewhere. Infinite values are returned as a
:class:`RateValue` carrying the reason, never as an exception.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import optimize

from .exceptions import AssumptionViolated, EtaZero, NotSymplectic, OutsideRange
from .schemes import SchemeLike, _abc, _det_tr, get_scheme, mode_matrices
from .spectral import NoiseSpec, SpectralVector, apply_pinv_sqrtQ, apply_sqrtQ, as_vector, mass, project


@dataclass(frozen=True)
class RateValue:
    value: float
    reason: Optional[str] = None

    def __post_init__(self):
        v = float(self.value)
        if math.isnan(v) or v < 0:
            raise ValueError(f"rate value must be non-negative, got {v}")
        object.__setattr__(self, "value", v)

    @classmethod
    def infinite(cls, reason: str) -> "RateValue":
        return cls(math.inf, reason)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    def __float__(self) -> float:
        return self.value

    def to_json(self):
        return {"value": self.value if self.is_finite else "inf", "reason": self.reason}


def _need_alpha(spec: NoiseSpec) -> None:
    if spec.alpha <= 0:
        raise ValueError("rate functions need alpha > 0")


def _pinv_rate(spec: NoiseSpec, x: SpectralVector, tol: float) -> RateValue:
    try:
        y = apply_pinv_sqrtQ(spec, x, tol)
    except OutsideRange as exc:
        return RateValue.infinite(f"OutsideRange: {exc}")
    return RateValue(mass(y) / spec.alpha**2)


def rate_I(spec: NoiseSpec, x, tol: float = 1e-12) -> RateValue:
    """Rate of the small-noise Gaussian limit of the continuous solution."""
    _need_alpha(spec)
    return _pinv_rate(spec, as_vector(x), tol)


def _truncated(spec: NoiseSpec, M: int) -> NoiseSpec:
    return NoiseSpec(spec.alpha, spec.eta_vector(M))


def rate_IM(spec: NoiseSpec, M: int, x, tol: float = 1e-12) -> RateValue:
    """Rate of the Galerkin truncation; infinite off ``H_M`` and off the range of ``Q_M^{1/2}``."""
    _need_alpha(spec)
    v = as_vector(x)
    if v.M > M and np.any(np.abs(v.coeffs[M:]) > tol):
        return RateValue.infinite(f"OutsideRange: component beyond mode {M}")
    return _pinv_rate(_truncated(spec, M), SpectralVector(v.padded(max(v.M, M))[:M]), tol)


class _ModeForms(NamedTuple):
    alpha2: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    det: np.ndarray
    tr: np.ndarray


def _mode_forms(spec: NoiseSpec, scheme: SchemeLike, M: int, tau: float, tol: float) -> _ModeForms:
    s = get_scheme(scheme)
    A, B = mode_matrices(s, tau, M)
    det, tr = _det_tr(A)
    if np.any(4 * det - tr**2 <= tol):
        k = int(np.flatnonzero(4 * det - tr**2 <= tol)[0]) + 1
        raise AssumptionViolated(f"{s.name}: conjugate-eigenvalue condition fails on mode {k}")
    if np.any(np.abs(det - 1) > tol):
        k = int(np.flatnonzero(np.abs(det - 1) > tol)[0]) + 1
        raise NotSymplectic(f"{s.name} is not symplectic (det A = {det[k - 1]:.6g} on mode {k})")
    a, b, c = _abc(A, B)
    return _ModeForms(spec.alpha**2 * spec.eta_vector(M), a, b, c, det, tr)


def full_lmgf(spec: NoiseSpec, scheme: SchemeLike, M: int, tau: float, lam, tol: float = 1e-10) -> float:
    """Limiting LMGF of the rescaled time average of a symplectic scheme."""
    f = _mode_forms(spec, scheme, M, tau, tol)
    v = as_vector(lam)
    if v.M > M:
        raise ValueError(f"lambda has {v.M} modes, expected at most {M}")
    c = v.padded(M)
    lr, li = c.real, c.imag
    sin2 = 1 - f.tr**2 / (4 * f.det)
    q = f.a * lr**2 + f.b * li**2 - 2 * f.c * lr * li
    return float(np.sum(f.alpha2 / (4 * tau * sin2) * q))


def rate_IMtau(spec: NoiseSpec, scheme: SchemeLike, M: int, tau: float, x,
               tol: float = 1e-10) -> RateValue:
    """Rate of the rescaled time average of a symplectic scheme.

    Raises
    ------
    EtaZero
        If a retained mode has zero noise.
    AssumptionViolated
        If the scheme is not symplectic, fails the conjugate-eigenvalue
        condition, or the per-mode quadratic form is not positive definite.
    """
    _need_alpha(spec)
    eta = spec.eta_vector(M)
    if np.any(eta == 0):
        raise EtaZero(f"eta vanishes on mode {int(np.flatnonzero(eta == 0)[0]) + 1}")
    f = _mode_forms(spec, scheme, M, tau, tol)
    if np.any(f.a * f.b - f.c**2 <= 0) or np.any(f.a <= 0):
        raise AssumptionViolated("per-mode form is not positive definite (|c| < sqrt(ab) fails)")
    v = as_vector(x)
    if v.M > M and np.any(np.abs(v.coeffs[M:]) > 1e-12):
        return RateValue.infinite(f"OutsideRange: component beyond mode {M}")
    z = v.padded(max(v.M, M))[:M]
    xr, xi = z.real, z.imag
    w = tau * (4 - f.tr**2) / (4 * (f.a * f.b - f.c**2) * f.alpha2)
    return RateValue(float(np.sum(w * (f.b * xr**2 + f.a * xi**2 + 2 * f.c * xr * xi))))


def rate_modified(spec: NoiseSpec, scheme: SchemeLike, M: int, tau: float, x,
                  tol: float = 1e-10) -> RateValue:
    r = rate_IMtau(spec, scheme, M, tau, x, tol)
    return r if not r.is_finite else RateValue(r.value / tau)


def rate_nonsymplectic(x, tol: float = 1e-12) -> RateValue:
    """Degenerate rate of a contracting scheme: zero at the origin only."""
    if mass(x) > tol:
        return RateValue.infinite("non-symplectic scheme: time average concentrates at 0")
    return RateValue(0.0)


# --- numerical Legendre transform --------------------------------------------------------

@dataclass(frozen=True)
class LegendreSearch:
    check_points: int = 8
    rtol: float = 1e-9
    fallback: bool = True
    seed: int = 0


def _to_real(c: np.ndarray) -> np.ndarray:
    return np.concatenate([c.real, c.imag])


def _to_complex(v: np.ndarray) -> np.ndarray:
    n = v.shape[0] // 2
    return v[:n] + 1j * v[n:]


def legendre_numeric(lmgf: Callable[[SpectralVector], float], z,
                     config: LegendreSearch = LegendreSearch()) -> RateValue:
    """``sup_lambda <lambda, z> - lmgf(lambda)`` computed numerically.

    The LMGF is probed for a quadratic model (value, gradient and Hessian by
    symmetric differences). When the model reproduces the LMGF at random
    check points the supremum is solved in closed form; otherwise a
    quasi-Newton search is used.
    """
    zc = as_vector(z).coeffs
    n2 = 2 * zc.shape[0]
    f = lambda v: float(lmgf(SpectralVector(_to_complex(v))))
    eye = np.eye(n2)
    f0 = f(np.zeros(n2))
    # per-coordinate steps from a first diagonal pass
    diag = np.array([f(eye[i]) + f(-eye[i]) - 2 * f0 for i in range(n2)])
    step = np.where(diag > 0, 1 / np.sqrt(np.abs(diag) + 1e-300), 1.0)
    E = eye * step
    fp = np.array([f(E[i]) for i in range(n2)])
    fm = np.array([f(-E[i]) for i in range(n2)])
    g = (fp - fm) / (2 * step)
    H = np.empty((n2, n2))
    for i in range(n2):
        H[i, i] = (fp[i] + fm[i] - 2 * f0) / step[i] ** 2
        for j in range(i + 1, n2):
            v = (f(E[i] + E[j]) - f(E[i] - E[j]) - f(-E[i] + E[j]) + f(-E[i] - E[j])) / 4
            H[i, j] = H[j, i] = v / (step[i] * step[j])
    rng = np.random.default_rng(config.seed)
    quadratic = True
    for _ in range(config.check_points):
        v = rng.standard_normal(n2) * step
        model = f0 + g @ v + 0.5 * v @ H @ v
        if abs(f(v) - model) > config.rtol * (1 + abs(model)):
            quadratic = False
            break
    w, V = np.linalg.eigh(H)
    wscale = max(float(np.abs(w).max()), 1e-300)
    if w.min() < -1e-9 * wscale:
        return RateValue.infinite("non-coercive LMGF: Hessian has a negative eigenvalue")
    target = _to_real(zc) - g
    if quadratic:
        proj = V.T @ target
        null = w <= 1e-12 * wscale
        if np.any(np.abs(proj[null]) > 1e-9 * (1 + np.abs(proj).max())):
            return RateValue.infinite("OutsideRange: z leaves the range of the LMGF Hessian")
        val = 0.5 * np.sum(proj[~null] ** 2 / w[~null]) - f0
        return RateValue(max(val, 0.0))
    if not config.fallback:
        raise AssumptionViolated("LMGF is not quadratic and fallback search is disabled")
    zr = _to_real(zc)
    res = optimize.minimize(lambda v: f(v) - zr @ v, np.zeros(n2), method="BFGS")
    return RateValue(max(-float(res.fun), 0.0))


# --- mass rate and preservation witness --------------------------------------------------

def mass_rate_J(spec: NoiseSpec, y: float) -> float:
    """Tail rate of ``sqrt(mass)/T``: ``y^2 / (alpha^2 eta_1)``."""
    _need_alpha(spec)
    if np.any(spec.etas <= 0):
        raise EtaZero("mass tail rate needs every eta_k > 0")
    if y < 0:
        raise ValueError("y must be non-negative")
    return float(y**2 / (spec.alpha**2 * spec.etas[0]))


class Witness(NamedTuple):
    x_M: SpectralVector
    gap: float
    distance: float


def preservation_witness(spec: NoiseSpec, M: int, x, tol: float = 1e-12) -> Witness:
    """Galerkin approximants ``x_M`` with ``I^M(x_M) -> I(x)``.

    ``x_M = Q_M^{1/2} P_M Q^{-1/2} x``; ``gap = |I^M(x_M) - I(x)|`` and
    ``distance = ||x - x_M||``. Raises :class:`OutsideRange` if ``x`` is off
    the range of ``Q^{1/2}``.
    """
    _need_alpha(spec)
    y = apply_pinv_sqrtQ(spec, x, tol)
    yM = project(y, M)
    xM = apply_sqrtQ(spec, yM)
    gap = abs(mass(yM) - mass(y)) / spec.alpha**2
    dist = math.sqrt(mass(SpectralVector(as_vector(x).coeffs - xM.coeffs)))
    return Witness(xM, gap, dist)
