"""Exact Gaussian law of the mild solution and its Galerkin truncation.

Per mode, with ``phi = k^2 (t - s)``, the mild solution is

    u_k(t) = exp(-i k^2 t) u0_k + alpha sqrt(eta_k) [int sin(phi) dB + i int cos(phi) dB]

so each mode is a bivariate Gaussian in ``(Re, Im)`` with an explicit
mean and covariance. Everything here is built from those integrals.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .exceptions import DivergentMoment, NumericalError
from .spectral import NoiseSpec, SpectralVector, as_vector


@dataclass(frozen=True)
class ExactLawParams:
    spec: NoiseSpec
    u0: SpectralVector
    T: float
    M: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "u0", as_vector(self.u0))
        if self.T < 0:
            raise ValueError("T must be non-negative")
        if self.u0.M > self.spec.n_modes and np.any(self.u0.coeffs[self.spec.n_modes:] != 0):
            raise ValueError("u0 has modes beyond the noise spectrum")
        M = self.spec.n_modes if self.M is None else int(self.M)
        if not 1 <= M <= self.spec.n_modes:
            raise ValueError(f"M must lie in 1..{self.spec.n_modes}")
        object.__setattr__(self, "M", M)

    @property
    def n_modes(self) -> int:
        return self.spec.n_modes


def _trig_integrals(k2: np.ndarray, T: float):
    """int_0^T sin^2, cos^2 and sin*cos of k^2 r."""
    s2 = np.sin(2 * k2 * T) / (4 * k2)
    sin2 = T / 2 - s2
    cos2 = T / 2 + s2
    sc = (1 - np.cos(2 * k2 * T)) / (4 * k2)
    return sin2, cos2, sc


def _modes(params: ExactLawParams, galerkin: bool) -> int:
    return params.M if galerkin else params.n_modes


def mode_covariances(params: ExactLawParams, galerkin: bool = False) -> np.ndarray:
    """Covariance of ``(Re u_k, Im u_k)`` for each mode; shape ``(n, 2, 2)``."""
    n = _modes(params, galerkin)
    k2 = np.arange(1, n + 1, dtype=float) ** 2
    S, C, X = _trig_integrals(k2, params.T)
    a2 = params.spec.alpha**2
    cp = params.spec.complex_part
    cov = np.empty((n, 2, 2))
    if cp is None:
        eta = params.spec.etas[:n]
        cov[:, 0, 0] = a2 * eta * S
        cov[:, 1, 1] = a2 * eta * C
        cov[:, 0, 1] = cov[:, 1, 0] = a2 * eta * X
    else:
        e1, e2 = cp.etas1[:n], cp.etas2[:n]
        g = cp.rho * np.sqrt(e1 * e2)
        cov[:, 0, 0] = a2 * (e1 * S + e2 * C - 2 * g * X)
        cov[:, 1, 1] = a2 * (e1 * C + e2 * S + 2 * g * X)
        cov[:, 0, 1] = cov[:, 1, 0] = a2 * ((e1 - e2) * X + g * (S - C))
    return cov


def mean_coefficients(params: ExactLawParams, galerkin: bool = False) -> np.ndarray:
    n = _modes(params, galerkin)
    k2 = np.arange(1, n + 1, dtype=float) ** 2
    return np.exp(-1j * k2 * params.T) * params.u0.padded(params.n_modes)[:n]


def _test_vector(params: ExactLawParams, h, galerkin: bool) -> np.ndarray:
    v = as_vector(h)
    n = _modes(params, galerkin)
    c = v.padded(max(v.M, params.n_modes))
    if galerkin:
        c[n:] = 0
    if np.any(c[params.n_modes:] != 0):
        raise ValueError("test vector has modes beyond the noise spectrum")
    return c[:n]


def exact_mean_pairing(params: ExactLawParams, h, galerkin: bool = False) -> float:
    hc = _test_vector(params, h, galerkin)
    m = mean_coefficients(params, galerkin)
    return float(np.sum(m.real * hc.real + m.imag * hc.imag))


def exact_var_pairing(params: ExactLawParams, h, galerkin: bool = False) -> float:
    """Variance of ``<u(T), h>``.

    Real noise uses the closed form
    ``alpha^2 sum eta_k [T/2 |h_k|^2 - sin(2k^2T)/(4k^2) (Re^2 - Im^2) + (1 - cos(2k^2T))/(2k^2) Re Im]``.
    Complex noise is delegated to :func:`exact_var_pairing_complex`.
    """
    if params.spec.complex_part is not None:
        return exact_var_pairing_complex(params, h, galerkin)
    hc = _test_vector(params, h, galerkin)
    n = hc.shape[0]
    k2 = np.arange(1, n + 1, dtype=float) ** 2
    T = params.T
    eta = params.spec.etas[:n]
    hr, hi = hc.real, hc.imag
    terms = (
        T / 2 * (hr**2 + hi**2)
        - np.sin(2 * k2 * T) / (4 * k2) * (hr**2 - hi**2)
        + (1 - np.cos(2 * k2 * T)) / (2 * k2) * hr * hi
    )
    return float(params.spec.alpha**2 * np.sum(eta * terms))


def exact_var_pairing_complex(params: ExactLawParams, h, galerkin: bool = False) -> float:
    """Variance of ``<u(T), h>`` driven by correlated complex noise ``W1 + i W2``."""
    cp = params.spec.complex_part
    if cp is None:
        raise ValueError("noise spec carries no complex part")
    hc = _test_vector(params, h, galerkin)
    n = hc.shape[0]
    k2 = np.arange(1, n + 1, dtype=float) ** 2
    T = params.T
    e1, e2 = cp.etas1[:n], cp.etas2[:n]
    g = np.sqrt(e1 * e2)
    rho = cp.rho
    hr, hi = hc.real, hc.imag
    s2 = np.sin(2 * k2 * T) / (4 * k2)
    c2 = (1 - np.cos(2 * k2 * T)) / (4 * k2)
    terms = (
        T / 2 * (e1 + e2) * (hr**2 + hi**2)
        - s2 * (e1 - e2) * (hr**2 - hi**2)
        + 2 * c2 * (e1 - e2) * hr * hi
        - 2 * rho * g * c2 * (hr**2 - hi**2)
        - 4 * rho * g * s2 * hr * hi
    )
    return float(params.spec.alpha**2 * np.sum(terms))


def _cov_sqrt(cov: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(cov)
    scale = np.maximum(1.0, np.trace(cov, axis1=-2, axis2=-1))
    if np.any(w < -1e-12 * scale[..., None]):
        raise NumericalError("covariance has a negative eigenvalue")
    w = np.clip(w, 0.0, None)
    return V * np.sqrt(w)[..., None, :]


def sample_galerkin_exact(params: ExactLawParams, rng: np.random.Generator,
                          size: Optional[int] = None, galerkin: bool = True):
    """Draw from the exact law of the truncated solution at time ``T``.

    Returns a :class:`SpectralVector` when ``size`` is None, otherwise a
    complex array of shape ``(size, M)``.
    """
    cov = mode_covariances(params, galerkin)
    L = _cov_sqrt(cov)
    mean = mean_coefficients(params, galerkin)
    n = mean.shape[0]
    count = 1 if size is None else int(size)
    z = rng.standard_normal((count, n, 2))
    x = np.einsum("kij,skj->ski", L, z)
    out = mean + x[..., 0] + 1j * x[..., 1]
    return SpectralVector(out[0]) if size is None else out


def continuous_lmgf(spec: NoiseSpec, lam) -> float:
    c = as_vector(lam).coeffs
    eta = spec.eta_vector(c.shape[0])
    return float(spec.alpha**2 / 4 * np.sum(eta * np.abs(c) ** 2))


def galerkin_lmgf(spec: NoiseSpec, M: int, lam) -> float:
    c = as_vector(lam).coeffs
    eta = spec.eta_vector(c.shape[0])
    eta[M:] = 0
    return float(spec.alpha**2 / 4 * np.sum(eta * np.abs(c) ** 2))


def mass_expectation(params: ExactLawParams, galerkin: bool = True) -> float:
    """``E ||u(T)||^2 = ||u0||^2 + alpha^2 T tr Q`` over the retained modes."""
    n = _modes(params, galerkin)
    u0 = params.u0.padded(params.n_modes)[:n]
    return float(np.sum(np.abs(u0) ** 2) + params.spec.alpha**2 * params.T * np.sum(params.spec.etas[:n]))


def fernique_closed_form(eigs, eps: float) -> float:
    """``E exp(eps ||X||^2)`` for centered Gaussian ``X`` with covariance eigenvalues ``eigs``."""
    lam = np.asarray(eigs, dtype=float)
    if np.any(lam < 0):
        raise ValueError("covariance eigenvalues must be non-negative")
    if lam.size and eps * lam.max() >= 0.5:
        return float("inf")
    return float(np.exp(-0.5 * np.sum(np.log1p(-2 * eps * lam))))


class FerniqueCheck(NamedTuple):
    mc: float
    se: float
    closed_form: float


def fernique_identity_check(eigs, eps: float, rng: np.random.Generator,
                            samples: int = 10**6, block: int = 2**16) -> FerniqueCheck:
    lam = np.asarray(eigs, dtype=float)
    if lam.size and eps >= 1 / (2 * lam.max()):
        raise DivergentMoment(f"eps={eps} is at or beyond the critical value {1 / (2 * lam.max())}")
    s = s2 = 0.0
    done = 0
    while done < samples:
        n = min(block, samples - done)
        z = rng.standard_normal((n, lam.size))
        w = np.exp(eps * (z**2 @ lam))
        s += w.sum()
        s2 += (w**2).sum()
        done += n
    m = s / samples
    var = max(s2 / samples - m**2, 0.0) * samples / (samples - 1)
    return FerniqueCheck(float(m), float(np.sqrt(var / samples)), fernique_closed_form(lam, eps))
