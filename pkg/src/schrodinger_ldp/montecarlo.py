"""Monte Carlo ensembles, exact-Gaussian oracles and convergence studies.

Random streams are split into fixed-size blocks; block ``b`` of stream
``tag`` draws from ``SeedSequence(seed, spawn_key=(tag, b))``. Results are
assembled in block order, so they do not depend on the thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .exact_law import ExactLawParams, fernique_closed_form, mass_expectation, sample_galerkin_exact
from .exceptions import DivergentMoment, TailTooDeep
from .rates import full_lmgf, mass_rate_J, preservation_witness, rate_I, rate_IM, rate_modified
from .schemes import SchemeLike, _step, eval_scheme, get_scheme, mode_matrices
from .spectral import NoiseSpec, SpectralVector, as_vector

STREAM_SCHEME = 1
STREAM_EXACT = 2
STREAM_FERNIQUE = 3
TAIL_FLOOR = 1e-4
Z95 = 1.959963984540054


@dataclass(frozen=True)
class EstimateWithCI:
    estimate: float
    se: float
    n: int
    ess: Optional[float] = None
    upper: Optional[float] = None
    flags: tuple = ()

    def ci(self, z: float = Z95) -> tuple[float, float]:
        return self.estimate - z * self.se, self.estimate + z * self.se


@dataclass(frozen=True)
class ExperimentConfig:
    spec: NoiseSpec
    scheme: SchemeLike
    M: int
    tau: float
    N: int
    samples: int = 1000
    seed: int = 0
    u0: Optional[SpectralVector] = None
    block_size: int = 4096

    def __post_init__(self):
        if self.M < 1 or self.N < 1 or self.samples < 0 or self.tau <= 0:
            raise ValueError("M and N must be positive, samples non-negative and tau > 0")
        u0 = SpectralVector.zeros(self.M) if self.u0 is None else as_vector(self.u0)
        object.__setattr__(self, "u0", SpectralVector(u0.padded(self.M)))

    @property
    def T(self) -> float:
        return self.N * self.tau

    @property
    def alphas(self) -> np.ndarray:
        return self.spec.alpha * np.sqrt(self.spec.eta_vector(self.M))


def block_rng(seed: int, tag: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tag, block)))


def _blocks(total: int, size: int) -> List[tuple[int, int]]:
    return [(b, min(size, total - b * size)) for b in range(math.ceil(total / size))]


def _run_blocks(fn: Callable[[int, int], np.ndarray], total: int, size: int, threads: int = 1):
    blocks = _blocks(total, size)
    if threads <= 1:
        parts = [fn(b, n) for b, n in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda bn: fn(*bn), blocks))
    return np.concatenate(parts, axis=0)


def simulate_ensemble(config: ExperimentConfig, threads: int = 1,
                      increments: Optional[np.ndarray] = None) -> np.ndarray:
    """Final states ``u^M_N`` of ``samples`` independent paths, shape ``(samples, M)``.

    ``increments`` of shape ``(samples, N, M)`` replays given Brownian
    increments instead of drawing fresh ones.
    """
    s = get_scheme(config.scheme)
    A, B = mode_matrices(s, config.tau, config.M)
    alphas = config.alphas
    sq = math.sqrt(config.tau)
    if increments is not None:
        increments = np.asarray(increments, float)
        if increments.shape != (config.samples, config.N, config.M):
            raise ValueError(f"increments must have shape {(config.samples, config.N, config.M)}")

    def run(b: int, n: int) -> np.ndarray:
        lo = b * config.block_size
        p = np.broadcast_to(config.u0.re, (n, config.M)).copy()
        q = np.broadcast_to(config.u0.im, (n, config.M)).copy()
        rng = None if increments is not None else block_rng(config.seed, STREAM_SCHEME, b)
        for j in range(config.N):
            db = increments[lo:lo + n, j] if rng is None else sq * rng.standard_normal((n, config.M))
            p, q = _step(p, q, A, B, alphas, db)
        return p + 1j * q

    return _run_blocks(run, config.samples, config.block_size, threads)


def sample_exact(params: ExactLawParams, samples: int, seed: int, threads: int = 1,
                 block_size: int = 1 << 16) -> np.ndarray:
    """Block-streamed draws from the exact truncated law; shape ``(samples, M)``."""
    return _run_blocks(lambda b, n: sample_galerkin_exact(params, block_rng(seed, STREAM_EXACT, b), n),
                       samples, block_size, threads)


# --- LMGF estimates and oracles ----------------------------------------------------------

def _pair(z: np.ndarray, lam) -> np.ndarray:
    l = as_vector(lam).padded(z.shape[-1])
    return z.real @ l.real + z.imag @ l.imag


def empirical_lmgf(samples: np.ndarray, lam, N: int, tau: float) -> EstimateWithCI:
    """``(1/N) log mean exp(<lam, u_N> / tau)`` with a delta-method standard error.

    Flags ``low-ess`` when the effective sample size of the exponential
    weights drops below 100 and ``degenerate`` when one sample carries
    essentially all the weight.
    """
    w = _pair(np.asarray(samples), lam) / tau
    n = w.shape[0]
    est = (logsumexp(w) - math.log(n)) / N
    e = np.exp(w - w.max())
    mean_e = e.mean()
    se = e.std(ddof=1) / (math.sqrt(n) * mean_e) / N if n > 1 else math.inf
    ess = float(e.sum() ** 2 / np.sum(e**2))
    flags = []
    if ess < 100:
        flags.append("low-ess")
    if ess < 1.5:
        flags.append("degenerate")
    return EstimateWithCI(float(est), float(se), n, ess=ess, flags=tuple(flags))


def moment_sweep(config: ExperimentConfig, Ns: Sequence[int]):
    """Exact means and covariances of every mode at the requested step counts.

    Returns arrays of shape ``(len(Ns), M, 2)`` and ``(len(Ns), M, 2, 2)``.
    """
    A, B = mode_matrices(config.scheme, config.tau, config.M)
    a2 = config.alphas**2
    G = a2[:, None, None] * config.tau * B[:, :, None] * B[:, None, :]
    Ns = np.asarray(Ns, dtype=int)
    order = np.argsort(Ns)
    m = np.stack([config.u0.re, config.u0.im], -1)
    c = np.zeros((config.M, 2, 2))
    means = np.empty((Ns.size, config.M, 2))
    covs = np.empty((Ns.size, config.M, 2, 2))
    n = 0
    for idx in order:
        while n < Ns[idx]:
            m = np.einsum("kij,kj->ki", A, m)
            c = np.einsum("kij,kjl,kml->kim", A, c, A) + G
            n += 1
        means[idx], covs[idx] = m, c
    return means, covs


def exact_gaussian_lmgf(config: ExperimentConfig, lam, Ns: Optional[Sequence[int]] = None):
    """Finite-``N`` LMGF ``(1/N)(E<lam,u_N>/tau + Var<lam,u_N>/(2 tau^2))``.

    Returns a float for ``config.N`` or an array over ``Ns``.
    """
    grid = [config.N] if Ns is None else list(Ns)
    l = as_vector(lam).padded(config.M)
    lv = np.stack([l.real, l.imag], -1)
    means, covs = moment_sweep(config, grid)
    E = np.einsum("nki,ki->n", means, lv)
    V = np.einsum("ki,nkij,kj->n", lv, covs, lv)
    out = (E / config.tau + V / (2 * config.tau**2)) / np.asarray(grid, float)
    return float(out[0]) if Ns is None else out


# --- tails ---------------------------------------------------------------------------------

def tail_probability(samples: np.ndarray, T: float, R: float) -> EstimateWithCI:
    """``P(||u(T)|| / T >= R)`` from state samples or precomputed masses."""
    s = np.asarray(samples)
    m = np.sum(np.abs(s) ** 2, axis=1) if s.ndim == 2 else s.astype(float)
    n = m.shape[0]
    hits = int(np.count_nonzero(m >= (T * R) ** 2))
    p = hits / n
    se = math.sqrt(p * (1 - p) / n)
    upper = 3.0 / n if hits == 0 else None
    return EstimateWithCI(p, se, n, upper=upper, flags=("no-hits",) if hits == 0 else ())


@dataclass
class StudyResult:
    header: tuple
    rows: list
    summary: dict = field(default_factory=dict)


def tail_study(spec: NoiseSpec, Ts: Sequence[float], R: float, samples: int, seed: int,
               u0=None, threads: int = 1, floor: Optional[float] = TAIL_FLOOR) -> StudyResult:
    """Mass tail probabilities against the Markov bound and the LDP slope ``J(R)``.

    Raises :class:`TailTooDeep` when an estimate falls below ``floor``.
    """
    M = spec.n_modes
    u0 = SpectralVector.zeros(M) if u0 is None else as_vector(u0)
    J = mass_rate_J(spec, R)
    rows, slopes = [], []
    for i, T in enumerate(Ts):
        params = ExactLawParams(spec, u0, float(T))
        z = sample_exact(params, samples, seed + i, threads)
        est = tail_probability(z, T, R)
        if floor is not None and est.estimate < floor:
            raise TailTooDeep(f"p_hat={est.estimate:.3g} at T={T:g} is below {floor:g}; "
                              "naive Monte Carlo is unreliable this deep in the tail")
        markov = min(1.0, mass_expectation(params) / (T * R) ** 2) if R > 0 else 1.0
        rows.append((float(T), float(R), est.estimate, est.se, markov, J))
        slopes.append(_slope_with_width(est, T))
    return StudyResult(("T", "R", "p_hat", "se", "markov_bound", "j_bound_slope"), rows,
                       {"J": J, "slopes": [s for s, _ in slopes], "slope_ci_halfwidth": [w for _, w in slopes]})


def _slope_with_width(est: EstimateWithCI, T: float) -> tuple[float, float]:
    """``-log(p)/T`` and its 95% half-width by the delta method."""
    if est.estimate <= 0:
        return math.inf, math.inf
    return -math.log(est.estimate) / T, Z95 * est.se / (est.estimate * T)


# --- convergence studies -----------------------------------------------------------------

def fit_order(xs, errs) -> Optional[float]:
    """Least-squares slope of ``log err`` against ``log x``; None when errors vanish."""
    xs, errs = np.asarray(xs, float), np.asarray(errs, float)
    keep = errs > 0
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(xs[keep]), np.log(errs[keep]), 1)[0])


def tau_convergence_study(spec: NoiseSpec, scheme: SchemeLike, M: int, taus: Sequence[float],
                          points: Sequence, exact_tol: float = 1e-12) -> StudyResult:
    """Modified rate ``I^{M,tau}/tau`` against the Galerkin rate as ``tau -> 0``."""
    rows, worst = [], []
    for tau in taus:
        errs = []
        for i, x in enumerate(points):
            mod = rate_modified(spec, scheme, M, tau, x).value
            gal = rate_IM(spec, M, x).value
            err = abs(mod - gal)
            rows.append((float(tau), i, mod, gal, err))
            errs.append(err / max(1.0, gal))
        worst.append(max(errs))
    exact = max(worst) <= exact_tol
    order = None if exact else fit_order(taus, worst)
    return StudyResult(("tau", "point_id", "mod_rate", "galerkin_rate", "abs_err"), rows,
                       {"fitted_order": order, "exact": exact, "max_rel_err": worst})


def m_convergence_study(spec: NoiseSpec, x, Ms: Sequence[int]) -> StudyResult:
    """Galerkin witness ``x_M`` and its rate gap for increasing ``M``."""
    I = rate_I(spec, x).value
    rows = []
    for M in Ms:
        w = preservation_witness(spec, M, x)
        rows.append((int(M), I, rate_IM(spec, M, w.x_M).value, w.gap, w.distance))
    gaps = [r[3] for r in rows]
    return StudyResult(("M", "rate_I", "rate_IM_xM", "gap", "distance"), rows,
                       {"monotone": bool(np.all(np.diff(gaps) <= 1e-15))})


def lmgf_study(config: ExperimentConfig, lam, Ns: Sequence[int], threads: int = 1) -> StudyResult:
    """Finite-``N`` exact-Gaussian LMGF, its limit and, when samples > 0, a Monte Carlo estimate."""
    exact = exact_gaussian_lmgf(config, lam, Ns)
    s = get_scheme(config.scheme)
    try:
        limit = full_lmgf(config.spec, s, config.M, config.tau, lam)
    except ValueError:
        limit = 0.0 if _contracting(config) else math.nan
    rows = []
    for i, N in enumerate(Ns):
        row = [int(N), float(exact[i]), limit, abs(exact[i] - limit), N * abs(exact[i] - limit)]
        if config.samples > 0:
            cfg = ExperimentConfig(config.spec, s, config.M, config.tau, int(N), config.samples,
                                   config.seed + i, config.u0, config.block_size)
            est = empirical_lmgf(simulate_ensemble(cfg, threads), lam, int(N), config.tau)
            row += [est.estimate, est.se, est.ess]
        rows.append(tuple(row))
    header = ("N", "exact_gaussian", "limit", "abs_diff", "N_times_diff")
    if config.samples > 0:
        header += ("empirical", "se", "ess")
    return StudyResult(header, rows, {"limit": limit})


def _contracting(config: ExperimentConfig) -> bool:
    A, _ = mode_matrices(config.scheme, config.tau, config.M)
    det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    return bool(np.all(det < 1))


def fernique_study(eigs, eps_list: Sequence[float], samples: int, seed: int,
                   threads: int = 1, block_size: int = 1 << 16) -> StudyResult:
    """Monte Carlo ``E exp(eps ||X||^2)`` against the product formula."""
    lam = np.asarray(eigs, dtype=float)
    crit = 1 / (2 * lam.max())
    rows = []
    for i, eps in enumerate(eps_list):
        if eps >= crit:
            raise DivergentMoment(f"eps={eps:g} is at or beyond the critical value {crit:g}")

        def run(b, n, eps=eps, i=i):
            z = block_rng(seed + i, STREAM_FERNIQUE, b).standard_normal((n, lam.size))
            return np.exp(eps * (z**2 @ lam))

        w = _run_blocks(run, samples, block_size, threads)
        se = w.std(ddof=1) / math.sqrt(samples)
        rows.append((float(eps), float(w.mean()), fernique_closed_form(lam, eps), float(se)))
    return StudyResult(("eps", "mc", "closed_form", "se"), rows, {"critical_eps": crit})
