"""One-step integrators of the per-mode linear system.

Each Galerkin mode ``k`` evolves the pair ``(p, q) = (Re, Im)`` by

    (p, q)_{n+1} = A(h) (p, q)_n + alpha_k B(h) dbeta_n,    h = k^2 tau,

with ``dbeta_n ~ N(0, tau)``. A scheme is the map ``h -> (A, B)``. Under
a complex-conjugate eigenvalue pair (``4 det A > tr(A)^2``) the powers of
``A`` and the resulting moments have closed forms via

    alpha_hat_n = det^{(n-1)/2} sin(n theta) / sin(theta),
    cos(theta) = tr / (2 sqrt(det)).
"""
from __future__ import annotations

import ast
import configparser
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, NamedTuple, Optional, Union

import numpy as np

from .exceptions import AssumptionViolated, ConfigError, NotSymplectic

CoeffFn = Callable[[np.ndarray], tuple]


@dataclass(frozen=True)
class SchemeDef:
    """A named scheme with its coefficient map and validity domain ``0 < h < h_max``."""

    name: str
    coeffs: CoeffFn = field(repr=False)
    h_max: float = math.inf
    description: str = ""

    def matrices(self, h) -> tuple[np.ndarray, np.ndarray]:
        """Return ``A`` with shape ``h.shape + (2, 2)`` and ``B`` with shape ``h.shape + (2,)``."""
        h = np.asarray(h, dtype=float)
        a11, a12, a21, a22, b1, b2 = (np.broadcast_to(np.asarray(v, float), h.shape)
                                      for v in self.coeffs(h))
        A = np.stack([np.stack([a11, a12], -1), np.stack([a21, a22], -1)], -2)
        B = np.stack([b1, b2], -1)
        return A, B


def _midpoint(h):
    d = 4 + h**2
    return ((4 - h**2) / d, 4 * h / d, -4 * h / d, (4 - h**2) / d, 2 * h / d, 4 / d)


def _exp_euler(h):
    c, s = np.cos(h), np.sin(h)
    return (c, s, -s, c, s, c)


def _backward_em(h):
    d = 1 + h**2
    return (1 / d, h / d, -h / d, 1 / d, h / d, 1 / d)


CATALOG: Dict[str, SchemeDef] = {
    "midpoint": SchemeDef("midpoint", _midpoint, description="implicit midpoint (Crank-Nicolson)"),
    "exp-euler": SchemeDef("exp-euler", _exp_euler, h_max=math.pi, description="exponential Euler"),
    "backward-em": SchemeDef("backward-em", _backward_em, description="backward Euler-Maruyama"),
}

SchemeLike = Union[str, SchemeDef]


def get_scheme(scheme: SchemeLike) -> SchemeDef:
    if isinstance(scheme, SchemeDef):
        return scheme
    try:
        return CATALOG[scheme]
    except KeyError:
        raise AssumptionViolated(f"unknown scheme {scheme!r}; known: {', '.join(CATALOG)}") from None


def _check_domain(s: SchemeDef, h: np.ndarray) -> None:
    bad = (h <= 0) | (h >= s.h_max) | ~np.isfinite(h)
    if np.any(bad):
        hb = float(np.asarray(h)[bad].flat[0])
        raise AssumptionViolated(f"h={hb:g} outside the validity domain (0, {s.h_max:g}) of {s.name}")


def eval_scheme(scheme: SchemeLike, h) -> tuple[np.ndarray, np.ndarray]:
    s = get_scheme(scheme)
    h = np.asarray(h, dtype=float)
    _check_domain(s, h)
    return s.matrices(h)


def _det_tr(A: np.ndarray):
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    tr = A[..., 0, 0] + A[..., 1, 1]
    return det, tr


def abc(scheme: SchemeLike, h):
    """Quadratic-form coefficients ``(a, b, c)`` of the limiting per-mode LMGF."""
    A, B = eval_scheme(scheme, h)
    return _abc(A, B)


def _abc(A, B):
    a11, a12, a21 = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0]
    b1, b2 = B[..., 0], B[..., 1]
    _, tr = _det_tr(A)
    s = a11 * b1 + a12 * b2
    d = a21 * b1 - a11 * b2
    a = (s - b1) ** 2 + b1 * s * (2 - tr)
    b = (d + b2) ** 2 - b2 * d * (2 - tr)
    c = 0.5 * d * b1 * tr + b1 * b2 * (tr**2 / 2 - 1) - s * d - 0.5 * tr * s * b2
    return a, b, c


def c_symplectic_form(scheme: SchemeLike, h):
    """Alternative expression for ``c`` valid when ``det A = 1``."""
    A, B = eval_scheme(scheme, h)
    a11, a12, a21, a22 = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
    b1, b2 = B[..., 0], B[..., 1]
    return (a11 - a22) / 2 * (a12 * b2**2 - a21 * b1**2 + b1 * b2 * (a11 - a22))


@dataclass
class AssumptionReport:
    scheme: str
    h: np.ndarray
    det: np.ndarray
    trace: np.ndarray
    in_domain: np.ndarray
    a1_margin: np.ndarray
    a1: np.ndarray
    det_deviation: np.ndarray
    a2: np.ndarray
    a3_margin: np.ndarray
    a3: np.ndarray
    a4: np.ndarray
    residual_A: np.ndarray
    residual_B: np.ndarray
    b_nonzero: np.ndarray
    classification: str
    reasons: list

    def to_dict(self) -> dict:
        out = {"scheme": self.scheme, "classification": self.classification, "reasons": list(self.reasons)}
        for name in ("h", "det", "trace", "a1_margin", "det_deviation", "a3_margin", "residual_A", "residual_B"):
            out[name] = [float(v) for v in getattr(self, name)]
        for name in ("in_domain", "a1", "a2", "a3", "a4", "b_nonzero"):
            out[name] = [bool(v) for v in getattr(self, name)]
        return out


def check_assumptions(scheme: SchemeLike, h_grid, tol: float = 1e-10) -> AssumptionReport:
    """Evaluate the structural assumptions on a grid of ``h`` values.

    The classification is ``symplectic`` when ``|det A - 1| <= tol`` on the
    whole grid, ``non-symplectic`` when ``det A < 1`` on the whole grid, and
    ``invalid`` when the conjugate-eigenvalue condition fails anywhere,
    ``h`` leaves the validity domain, ``B`` vanishes, or the two
    determinant regimes are mixed.
    """
    s = get_scheme(scheme)
    h = np.atleast_1d(np.asarray(h_grid, dtype=float))
    in_domain = (h > 0) & (h < s.h_max) & np.isfinite(h)
    A, B = s.matrices(np.where(in_domain, h, np.nan))
    det, tr = _det_tr(A)
    a1_margin = 4 * det - tr**2
    with np.errstate(invalid="ignore"):
        a1 = in_domain & (a1_margin > tol)
        dev = np.abs(det - 1)
        a2 = in_domain & (dev <= tol)
        a4 = in_domain & (det < 1) & ~a2
        a, b, c = _abc(A, B)
        ab = a * b
        a3_margin = np.where(ab > 0, 1 - np.abs(c) / np.sqrt(np.where(ab > 0, ab, 1)), -np.inf)
        a3 = in_domain & (a > 0) & (b > 0) & (c**2 < ab)
    res_A = (np.abs(A[..., 0, 0] - 1) + np.abs(A[..., 1, 1] - 1)
             + np.abs(A[..., 0, 1] - h) + np.abs(A[..., 1, 0] + h))
    res_B = np.abs(B[..., 0]) + np.abs(B[..., 1] - 1)
    b_nonzero = ~(in_domain & (np.abs(B[..., 0]) + np.abs(B[..., 1]) == 0))

    reasons = []
    if not in_domain.all():
        reasons.append(f"h outside validity domain (0, {s.h_max:g}) at {int((~in_domain).sum())} grid points")
    if not a1.all():
        reasons.append(f"conjugate-eigenvalue condition 4det-tr^2>0 fails at {int((~a1).sum())} grid points")
    if not b_nonzero.all():
        reasons.append("noise vector B vanishes")
    if reasons:
        cls = "invalid"
    elif a2.all():
        cls = "symplectic"
    elif a4.all():
        cls = "non-symplectic"
    else:
        cls = "invalid"
        reasons.append("determinant neither identically 1 nor below 1 on the grid")
    return AssumptionReport(s.name, h, det, tr, in_domain, a1_margin, a1, dev, a2,
                            a3_margin, a3, a4, res_A, res_B, b_nonzero, cls, reasons)


def consistency_orders(scheme: SchemeLike, hs=None) -> tuple[float, float]:
    """Fitted log-log slopes of the consistency residuals.

    ``|a11-1| + |a22-1| + |a12-h| + |a21+h|`` should scale like ``h^2`` and
    ``|b1| + |b2-1|`` like ``h``; the raw slopes are returned.
    """
    hs = 2.0 ** -np.arange(3, 11) if hs is None else np.asarray(hs, float)
    r = check_assumptions(scheme, hs)
    lh = np.log(hs)
    slope_A = np.polyfit(lh, np.log(r.residual_A), 1)[0]
    slope_B = np.polyfit(lh, np.log(r.residual_B), 1)[0]
    return float(slope_A), float(slope_B)


def theta(scheme: SchemeLike, h, tol: float = 1e-10):
    A, _ = eval_scheme(scheme, h)
    return _theta(A, tol)


def _theta(A, tol=1e-10):
    det, tr = _det_tr(A)
    disc = 4 * det - tr**2
    if np.any(disc <= tol):
        raise AssumptionViolated("conjugate-eigenvalue condition 4det-tr^2>0 fails")
    return np.arctan2(np.sqrt(disc), tr)


def _alpha_hat(det, th, n):
    n = np.asarray(n, dtype=float)
    return det ** ((n - 1) / 2) * np.sin(n * th) / np.sin(th)


def alpha_hat(scheme: SchemeLike, h, n, tol: float = 1e-10):
    A, _ = eval_scheme(scheme, h)
    det, _ = _det_tr(A)
    return _alpha_hat(det, _theta(A, tol), n)


def matrix_power(scheme: SchemeLike, h: float, n) -> np.ndarray:
    """``A(h)^n`` from the scalar sequence ``alpha_hat``; shape ``n.shape + (2, 2)``."""
    A, _ = eval_scheme(scheme, h)
    det, _ = _det_tr(A)
    th = _theta(A)
    n = np.asarray(n)
    ah = lambda m: _alpha_hat(det, th, m)
    a11, a12, a21 = A[0, 0], A[0, 1], A[1, 0]
    an = ah(n)
    out = np.empty(n.shape + (2, 2))
    out[..., 0, 0] = -det * ah(n - 1) + a11 * an
    out[..., 0, 1] = a12 * an
    out[..., 1, 0] = a21 * an
    out[..., 1, 1] = ah(n + 1) - a11 * an
    return out


def mode_matrices(scheme: SchemeLike, tau: float, M: int):
    """``A`` and ``B`` for modes ``1..M``; validates every ``k^2 tau``."""
    k2 = np.arange(1, M + 1, dtype=float) ** 2
    return eval_scheme(scheme, k2 * tau)


def step(p: np.ndarray, q: np.ndarray, scheme: SchemeLike, tau: float,
         alphas: np.ndarray, dbeta: np.ndarray):
    """Advance coefficient arrays of shape ``(..., M)`` by one step.

    ``dbeta`` holds the Brownian increments (variance ``tau``) for each mode.
    Passing recorded increments replays a path exactly.
    """
    A, B = mode_matrices(scheme, tau, np.shape(p)[-1])
    return _step(p, q, A, B, np.asarray(alphas), dbeta)


def _step(p, q, A, B, alphas, dbeta):
    noise = alphas * dbeta
    p1 = A[:, 0, 0] * p + A[:, 0, 1] * q + B[:, 0] * noise
    q1 = A[:, 1, 0] * p + A[:, 1, 1] * q + B[:, 1] * noise
    return p1, q1


class ModeGaussianState(NamedTuple):
    mean: np.ndarray
    cov: np.ndarray
    n: int


def moment_trajectory(scheme: SchemeLike, k: int, alpha_k: float, tau: float, N: int,
                      init=(0.0, 0.0)):
    """Exact mean and covariance recursion for ``n = 0..N``.

    Returns arrays of shape ``(N + 1, 2)`` and ``(N + 1, 2, 2)``.
    """
    A, B = eval_scheme(scheme, k**2 * tau)
    G = alpha_k**2 * tau * np.outer(B, B)
    means = np.empty((N + 1, 2))
    covs = np.empty((N + 1, 2, 2))
    m = np.asarray(init, dtype=float)
    c = np.zeros((2, 2))
    means[0], covs[0] = m, c
    for n in range(1, N + 1):
        m = A @ m
        c = A @ c @ A.T + G
        means[n], covs[n] = m, c
    return means, covs


def propagate_moments(scheme: SchemeLike, k: int, alpha_k: float, tau: float, N: int,
                      init=(0.0, 0.0)) -> ModeGaussianState:
    A, B = eval_scheme(scheme, k**2 * tau)
    G = alpha_k**2 * tau * np.outer(B, B)
    m = np.asarray(init, dtype=float)
    c = np.zeros((2, 2))
    for _ in range(N):
        m = A @ m
        c = A @ c @ A.T + G
    return ModeGaussianState(m, c, N)


def closed_form_mean(scheme: SchemeLike, k: int, tau: float, N, init=(0.0, 0.0)) -> np.ndarray:
    """Mean of ``(p_N, q_N)`` for any determinant; shape ``N.shape + (2,)``."""
    A, _ = eval_scheme(scheme, k**2 * tau)
    det, _ = _det_tr(A)
    th = _theta(A)
    N = np.asarray(N)
    p0, q0 = init
    ah = lambda m: _alpha_hat(det, th, m)
    aN = ah(N)
    Ep = -det * ah(N - 1) * p0 + aN * (A[0, 0] * p0 + A[0, 1] * q0)
    Eq = A[1, 0] * aN * p0 + ah(N + 1) * q0 - A[0, 0] * aN * q0
    return np.stack([Ep, Eq], -1)


class ClosedFormMoments(NamedTuple):
    mean: np.ndarray
    var_p: np.ndarray
    var_q: np.ndarray
    cor: np.ndarray
    remainder_bound: np.ndarray


def closed_form_moments(scheme: SchemeLike, k: int, alpha_k: float, tau: float, N,
                        init=(0.0, 0.0), tol: float = 1e-10) -> ClosedFormMoments:
    """Leading-order second moments at step ``N`` for a symplectic scheme.

    The exact moments differ from the linear-in-``N`` terms by a bounded
    oscillating remainder; ``remainder_bound`` gives explicit bounds
    ``tau alpha^2 (|u|+|v|)(|u'|+|v'|) / (2 sin^3 theta)`` for
    ``(var_p, var_q, cor)``.
    """
    A, B = eval_scheme(scheme, k**2 * tau)
    det, tr = _det_tr(A)
    if abs(det - 1) > tol:
        raise NotSymplectic(f"det A = {det:.15g} at h={k**2 * tau:g}; leading moments need det A = 1")
    th = _theta(A, tol)
    N = np.asarray(N, dtype=float)
    b1, b2 = B
    s = A[0, 0] * b1 + A[0, 1] * b2
    d = A[1, 0] * b1 - A[0, 0] * b2
    ct, st = np.cos(th), np.sin(th)
    pref = tau * alpha_k**2 * N / (2 * st**2)
    var_p = pref * (b1**2 + s**2 - 2 * s * b1 * ct)
    var_q = pref * (b2**2 + d**2 + 2 * d * b2 * ct)
    cor = -pref * (d * b1 * ct + b1 * b2 * np.cos(2 * th) - s * d - s * b2 * ct)
    up, uq = abs(b1) + abs(s), abs(b2) + abs(d)
    rb = tau * alpha_k**2 / (2 * st**3) * np.array([up**2, uq**2, up * uq])
    return ClosedFormMoments(closed_form_mean(scheme, k, tau, N.astype(int), init),
                             var_p, var_q, cor, rb)


# --- custom schemes from structured text -------------------------------------------------

_FUNCS = {"sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "sqrt": np.sqrt,
          "log": np.log, "arctan": np.arctan, "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh}
_CONSTS = {"pi": math.pi, "e": math.e}
_ALLOWED = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name, ast.Load, ast.Call,
            ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)
COEFF_KEYS = ("a11", "a12", "a21", "a22", "b1", "b2")


def compile_expression(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """Compile an arithmetic expression in ``h`` with a whitelisted grammar."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {text!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ValueError(f"disallowed syntax {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ValueError(f"non-numeric constant in {text!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or node.keywords:
                raise ValueError(f"disallowed call in {text!r}")
        if isinstance(node, ast.Name) and node.id not in _FUNCS and node.id not in _CONSTS and node.id != "h":
            raise ValueError(f"unknown name {node.id!r} in {text!r}")
    code = compile(tree, "<scheme>", "eval")
    env = {"__builtins__": {}, **_FUNCS, **_CONSTS}
    return lambda h: eval(code, env, {"h": h})


def scheme_from_expressions(name: str, exprs: Dict[str, str], h_max: float = math.inf) -> SchemeDef:
    missing = [k for k in COEFF_KEYS if k not in exprs]
    if missing:
        raise ValueError(f"missing coefficient(s): {', '.join(missing)}")
    fns = [compile_expression(exprs[k]) for k in COEFF_KEYS]
    return SchemeDef(name, lambda h: tuple(f(h) for f in fns), h_max, "custom")


def load_scheme(path: str) -> SchemeDef:
    """Read a custom scheme from an INI file with a ``[scheme]`` section.

    Keys: ``name``, ``a11 a12 a21 a22 b1 b2`` (expressions in ``h``) and an
    optional ``h_max``.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            text = fh.read()
        cp.read_string(text, source=path)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(str(exc)) from None
    if not cp.has_section("scheme"):
        raise ConfigError("missing [scheme] section")
    sec = cp["scheme"]
    lines = _key_lines(text, "scheme")
    unknown = [k for k in sec if k not in COEFF_KEYS + ("name", "h_max")]
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", lines.get(unknown[0]))
    h_max = math.inf
    if "h_max" in sec:
        try:
            h_max = float(compile_expression(sec["h_max"])(0.0))
        except ValueError as exc:
            raise ConfigError(str(exc), lines.get("h_max")) from None
    exprs = {}
    for key in COEFF_KEYS:
        if key not in sec:
            raise ConfigError(f"missing coefficient {key!r}")
        try:
            compile_expression(sec[key])
        except ValueError as exc:
            raise ConfigError(str(exc), lines.get(key)) from None
        exprs[key] = sec[key]
    return scheme_from_expressions(sec.get("name", "custom"), exprs, h_max)


def _key_lines(text: str, section: str) -> Dict[str, int]:
    out, current = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
        elif current == section and "=" in line and not line.startswith(("#", ";")):
            out.setdefault(line.split("=", 1)[0].strip().lower(), i)
    return out
