"""Spectral representation on the sine/eigenbasis of the Laplacian.

A state is a finite vector of complex coefficients ``c_k`` for modes
``k = 1..M``; mode ``k`` has Laplacian eigenvalue ``-k**2``. The Hilbert
space is viewed as a real space, so the inner product is
``sum(Re x Re y + Im x Im y)``.

Modes past the end of a noise spectrum are treated as having eigenvalue
zero, so vectors supported there lie outside the range of ``Q^{1/2}``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .exceptions import OutsideRange

ArrayLike = Union[Sequence[complex], np.ndarray]


@dataclass(frozen=True)
class SpectralVector:
    """Immutable vector of complex spectral coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, M: int) -> "SpectralVector":
        return cls(np.zeros(M, dtype=complex))

    @classmethod
    def basis(cls, k: int, M: int, value: complex = 1.0) -> "SpectralVector":
        """Vector ``value * e_k`` with 1-based mode index ``k``."""
        if not 1 <= k <= M:
            raise ValueError(f"mode {k} outside 1..{M}")
        c = np.zeros(M, dtype=complex)
        c[k - 1] = value
        return cls(c)

    @property
    def M(self) -> int:
        return self.coeffs.shape[0]

    @property
    def re(self) -> np.ndarray:
        return self.coeffs.real

    @property
    def im(self) -> np.ndarray:
        return self.coeffs.imag

    def padded(self, M: int) -> np.ndarray:
        """Coefficients zero-padded (or checked) to length ``M``."""
        if M < self.M:
            if np.any(self.coeffs[M:] != 0):
                raise ValueError(f"vector has nonzero modes beyond {M}")
            return np.array(self.coeffs[:M])
        out = np.zeros(M, dtype=complex)
        out[: self.M] = self.coeffs
        return out

    def __len__(self) -> int:
        return self.M

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpectralVector):
            return NotImplemented
        return self.M == other.M and bool(np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self) -> int:
        return hash(self.coeffs.tobytes())


def as_vector(x: Union[SpectralVector, ArrayLike]) -> SpectralVector:
    return x if isinstance(x, SpectralVector) else SpectralVector(np.asarray(x))


@dataclass(frozen=True)
class ComplexNoise:
    """Two independent-in-law Wiener components ``W1 + i W2`` with correlation ``rho``."""

    etas1: np.ndarray
    etas2: np.ndarray
    rho: float = 0.0

    def __post_init__(self):
        e1 = _check_etas(self.etas1)
        e2 = _check_etas(self.etas2)
        if e1.shape != e2.shape:
            raise ValueError("etas1 and etas2 must have the same length")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        object.__setattr__(self, "etas1", e1)
        object.__setattr__(self, "etas2", e2)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise amplitude and covariance spectrum.

    ``etas`` are the eigenvalues of the covariance operator seen by the
    rate functions. For complex noise they are ``etas1 + etas2``, the
    spectrum of the effective operator ``Q1 + Q2``.
    """

    alpha: float
    etas: np.ndarray
    complex_part: Optional[ComplexNoise] = field(default=None)

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError("alpha must be a finite non-negative number")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "etas", _check_etas(self.etas))

    @classmethod
    def from_rule(cls, alpha: float, rule: str, M: int) -> "NoiseSpec":
        """Build ``eta_k = k**-p`` for ``k = 1..M`` from a rule like ``"k^-4"``."""
        return cls(alpha, etas_from_rule(rule, M))

    @classmethod
    def complex_noise(cls, alpha: float, etas1: ArrayLike, etas2: ArrayLike, rho: float = 0.0) -> "NoiseSpec":
        part = ComplexNoise(np.asarray(etas1, float), np.asarray(etas2, float), rho)
        return cls(alpha, part.etas1 + part.etas2, part)

    @property
    def n_modes(self) -> int:
        return self.etas.shape[0]

    def eta_vector(self, M: int) -> np.ndarray:
        """Eigenvalues for modes ``1..M``, zero past the stored spectrum."""
        out = np.zeros(M)
        n = min(M, self.n_modes)
        out[:n] = self.etas[:n]
        return out

    def trace(self, M: Optional[int] = None) -> float:
        return float(np.sum(self.etas if M is None else self.eta_vector(M)))


_RULE = re.compile(r"^\s*k\s*\^\s*-\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*$")


def etas_from_rule(rule: str, M: int) -> np.ndarray:
    m = _RULE.match(rule)
    if m is None:
        raise ValueError(f"cannot parse eigenvalue rule {rule!r}; expected 'k^-p'")
    if M < 1:
        raise ValueError("M must be at least 1")
    p = float(m.group(1))
    return np.arange(1, M + 1, dtype=float) ** (-p)


def _check_etas(etas) -> np.ndarray:
    e = np.array(etas, dtype=float).reshape(-1)
    if e.size == 0:
        raise ValueError("eigenvalue list is empty")
    if not np.all(np.isfinite(e)) or np.any(e < 0):
        raise ValueError("eigenvalues must be finite and non-negative")
    if np.any(np.diff(e) > 0):
        raise ValueError("eigenvalues must be non-increasing")
    e.setflags(write=False)
    return e


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_vector(x), as_vector(y)
    if a.M != b.M:
        raise ValueError(f"dimension mismatch: {a.M} vs {b.M}")
    return a.coeffs, b.coeffs


def real_inner(x, y) -> float:
    a, b = _pair(x, y)
    return float(np.sum(a.real * b.real + a.imag * b.imag))


def mass(x) -> float:
    c = as_vector(x).coeffs
    return float(np.sum(c.real**2 + c.imag**2))


def project(x, m: int) -> SpectralVector:
    """Orthogonal projection onto the first ``m`` modes, same length as ``x``."""
    v = as_vector(x)
    if m < 0:
        raise ValueError("m must be non-negative")
    c = np.array(v.coeffs)
    c[m:] = 0
    return SpectralVector(c)


def apply_sqrtQ(spec: NoiseSpec, x) -> SpectralVector:
    v = as_vector(x)
    return SpectralVector(np.sqrt(spec.eta_vector(v.M)) * v.coeffs)


def apply_pinv_sqrtQ(spec: NoiseSpec, x, tol: float = 1e-12) -> SpectralVector:
    """Pseudo-inverse of ``Q^{1/2}``.

    Raises
    ------
    OutsideRange
        If a component larger than ``tol`` sits on a mode with zero eigenvalue.
    """
    v = as_vector(x)
    eta = spec.eta_vector(v.M)
    null = eta == 0
    if np.any(np.abs(v.coeffs[null]) > tol):
        k = int(np.flatnonzero(null & (np.abs(v.coeffs) > tol))[0]) + 1
        raise OutsideRange(f"component on mode {k} where eta vanishes")
    out = np.zeros(v.M, dtype=complex)
    out[~null] = v.coeffs[~null] / np.sqrt(eta[~null])
    return SpectralVector(out)
