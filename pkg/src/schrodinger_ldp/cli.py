"""Command line front end: ``validate``, ``rate``, ``study`` and ``simulate``.

Every refusal prints a JSON object ``{"status": "refused", "reason": CODE, ...}``
and exits with a nonzero status.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
import time
from importlib import metadata
from typing import Optional, Sequence

import numpy as np

from . import montecarlo as mc
from .config import RunConfig, load_config, parse_grid
from .exceptions import ConfigError, LDPError
from .output import jsonable, sha256, write_csv, write_dat, write_json
from .rates import rate_I, rate_IM, rate_IMtau, rate_modified, rate_nonsymplectic
from .schemes import check_assumptions, get_scheme, load_scheme, mode_matrices
from .spectral import SpectralVector

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_REFUSED, EXIT_CONFIG = 0, 1, 2, 3, 4
STUDIES = ("tau-convergence", "m-convergence", "lmgf", "tail", "fernique")
RATE_KINDS = ("continuous", "galerkin", "full", "modified", "non-symplectic")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.0.0"


class Refusal(Exception):
    def __init__(self, reason: str, message: str, **extra):
        super().__init__(message)
        self.reason, self.extra = reason, extra


def _emit(obj) -> None:
    print(json.dumps(jsonable(obj), indent=1, sort_keys=True))


# --- validate ------------------------------------------------------------------------------

def cmd_validate(args) -> int:
    cfg = load_config(args.config) if args.config else None
    if args.scheme_file:
        scheme = load_scheme(args.scheme_file)
    elif args.scheme:
        scheme = get_scheme(args.scheme)
    elif cfg is not None:
        scheme = cfg.scheme()
    else:
        raise Refusal("USAGE", "give --scheme, --scheme-file or a config with [scheme]")
    if args.h_grid:
        grid = parse_grid(args.h_grid)
    elif cfg is not None and cfg.get("observables", "h_grid") is not None:
        grid = np.asarray(cfg.get("observables", "h_grid"))
    else:
        raise Refusal("USAGE", "give --h-grid a:b:n")
    report = check_assumptions(scheme, grid, args.tol)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        header = ("h", "det", "trace", "a1_margin", "det_deviation", "a3_margin", "a1", "a2", "a3", "a4")
        rows = zip(*(report.to_dict()[c] for c in header))
        _write_table(os.path.join(args.out, f"validate.{args.format}"), header, list(rows), args.format)
    out = report.to_dict()
    ok = report.classification in ("symplectic", "non-symplectic")
    out["status"] = "ok" if ok else "refused"
    if not ok:
        out["reason"] = "INVALID_SCHEME"
    _emit(out)
    return EXIT_OK if ok else EXIT_REFUSED


# --- rate ----------------------------------------------------------------------------------

def read_vector(path: str) -> SpectralVector:
    """Vector file: JSON list of numbers or ``[re, im]`` pairs, or text lines ``re [im]``."""
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".json") or text.lstrip().startswith("["):
        data = json.loads(text)
        if isinstance(data, dict):
            data = data["coeffs"]
        vals = [complex(v[0], v[1]) if isinstance(v, list) else complex(v) for v in data]
    else:
        vals = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].split()
            if line:
                vals.append(complex(float(line[0]), float(line[1]) if len(line) > 1 else 0.0))
    if not vals:
        raise ConfigError(f"{path}: empty vector")
    return SpectralVector(np.asarray(vals, complex))


def _vector_arg(args, cfg: Optional[RunConfig]) -> SpectralVector:
    if args.x:
        return read_vector(args.x)
    if cfg is not None and cfg.get("observables", "x") is not None:
        return SpectralVector(np.asarray(cfg.get("observables", "x"), complex))
    raise Refusal("USAGE", "give --x FILE or observables.x in the config")


def cmd_rate(args) -> int:
    if not args.config:
        raise Refusal("USAGE", "rate needs --config")
    cfg = load_config(args.config)
    spec = cfg.noise_spec()
    x = _vector_arg(args, cfg)
    M = cfg.galerkin_M()
    kind = args.kind
    if kind == "continuous":
        r = rate_I(spec, x)
    elif kind == "galerkin":
        r = rate_IM(spec, M, x)
    elif kind == "non-symplectic":
        scheme = cfg.scheme()
        tau = cfg.require("time", "tau")
        A, _ = mode_matrices(scheme, tau, M)
        det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
        if not np.all(det < 1 - 1e-10):
            raise Refusal("ASSUMPTION_VIOLATED", f"{scheme.name} is not contracting (det A >= 1)")
        r = rate_nonsymplectic(x)
    else:
        scheme = cfg.scheme()
        tau = cfg.require("time", "tau")
        fn = rate_IMtau if kind == "full" else rate_modified
        r = fn(spec, scheme, M, tau, x)
    _emit({"status": "ok", "kind": kind, **r.to_json()})
    return EXIT_OK


# --- studies -------------------------------------------------------------------------------

def _write_table(path: str, header, rows, fmt: str) -> None:
    (write_csv if fmt == "csv" else write_json)(path, header, rows)


def _seed(args, cfg: RunConfig) -> int:
    return args.seed if args.seed is not None else cfg.get("mc", "seed", 0)


def _experiment(cfg: RunConfig, seed: int, samples_default: int = 0) -> mc.ExperimentConfig:
    M = cfg.galerkin_M()
    return mc.ExperimentConfig(cfg.noise_spec(), cfg.scheme(), M, cfg.require("time", "tau"),
                               cfg.get("time", "N", 1), cfg.get("mc", "samples", samples_default),
                               seed, cfg.u0(M), cfg.get("mc", "block_size", 4096))


def run_study(kind: str, cfg: RunConfig, seed: int, threads: int) -> mc.StudyResult:
    if kind == "tau-convergence":
        spec, scheme, M = cfg.noise_spec(), cfg.scheme(), cfg.galerkin_M()
        taus = cfg.get("time", "taus") or [cfg.require("time", "tau")]
        pts = cfg.get("observables", "points") or [cfg.require("observables", "x")]
        return mc.tau_convergence_study(spec, scheme, M, taus, [np.asarray(p, complex) for p in pts])
    if kind == "m-convergence":
        spec = cfg.noise_spec()
        x = np.asarray(cfg.require("observables", "x"), complex)
        Ms = cfg.get("observables", "Ms") or list(range(1, spec.n_modes + 1))
        return mc.m_convergence_study(spec, x, Ms)
    if kind == "lmgf":
        exp = _experiment(cfg, seed)
        lam = np.asarray(cfg.require("observables", "lambda"), complex)
        return mc.lmgf_study(exp, lam, cfg.get("time", "Ns") or [exp.N], threads)
    if kind == "tail":
        spec = cfg.noise_spec()
        Ts = cfg.require("time", "T")
        R = cfg.require("observables", "R")
        return mc.tail_study(spec, Ts, R, cfg.get("mc", "samples", 10**5), seed,
                             cfg.u0(spec.n_modes), threads)
    if kind == "fernique":
        eigs = cfg.get("observables", "eigs")
        if eigs is None:
            spec = cfg.noise_spec()
            eigs = list(spec.etas[: cfg.galerkin_M()])
        crit = 1 / (2 * max(eigs))
        eps = cfg.get("observables", "eps")
        if eps is None:
            eps = [f * crit for f in cfg.require("observables", "eps_fraction")]
        return mc.fernique_study(eigs, eps, cfg.get("mc", "samples", 10**5), seed, threads)
    raise Refusal("USAGE", f"unknown study kind {kind!r}")


def _manifest(args, cfg: RunConfig, seed: int, outputs, t0: float, summary=None) -> dict:
    return {
        "tool": "slse-ldp",
        "version": _version(),
        "command": args.command,
        "kind": getattr(args, "kind", None),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "seed": seed,
        "threads": args.threads,
        "config": cfg.echo(),
        "config_text": cfg.text,
        "outputs": [{"path": os.path.basename(p), "sha256": sha256(p)} for p in outputs],
        "duration_s": round(time.perf_counter() - t0, 6),
        "summary": jsonable(summary or {}),
    }


def _finish(args, cfg, seed, outputs, t0, summary) -> None:
    man_path = os.path.join(args.out, "manifest.json")
    with open(man_path, "w") as fh:
        json.dump(_manifest(args, cfg, seed, outputs, t0, summary), fh, indent=1, sort_keys=True)
        fh.write("\n")
    _emit({"status": "ok", "outputs": [os.path.basename(p) for p in outputs] + ["manifest.json"],
           "summary": summary})


def cmd_study(args) -> int:
    t0 = time.perf_counter()
    if not args.config or not args.out:
        raise Refusal("USAGE", "study needs --config and --out")
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    res = run_study(args.kind, cfg, seed, args.threads)
    os.makedirs(args.out, exist_ok=True)
    table = os.path.join(args.out, f"{args.kind}.{args.format}")
    dat = os.path.join(args.out, f"{args.kind}.dat")
    _write_table(table, res.header, res.rows, args.format)
    write_dat(dat, res.header, res.rows)
    _finish(args, cfg, seed, [table, dat], t0, res.summary)
    return EXIT_OK


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    if not args.config or not args.out:
        raise Refusal("USAGE", "simulate needs --config and --out")
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    exp = _experiment(cfg, seed, 1000)
    z = mc.simulate_ensemble(exp, args.threads)
    os.makedirs(args.out, exist_ok=True)
    header = ("sample", "mode", "re", "im")
    rows = [(i, k + 1, float(z[i, k].real), float(z[i, k].imag))
            for i in range(z.shape[0]) for k in range(z.shape[1])]
    path = os.path.join(args.out, f"samples.{args.format}")
    _write_table(path, header, rows, args.format)
    mass = np.sum(np.abs(z) ** 2, axis=1)
    summary = {"samples": int(z.shape[0]), "M": exp.M, "N": exp.N, "tau": exp.tau,
               "mean_mass": float(mass.mean())}
    _finish(args, cfg, seed, [path], t0, summary)
    return EXIT_OK


# --- entry point ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run config, or a manifest.json to re-run")
    common.add_argument("--seed", type=int, default=None, help="master seed (default: mc.seed or 0)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, default=1)

    p = argparse.ArgumentParser(prog="slse-ldp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", parents=[common], help="classify a scheme on an h grid")
    v.add_argument("--scheme", help="catalog scheme name")
    v.add_argument("--scheme-file", help="custom scheme INI file")
    v.add_argument("--h-grid", help="a:b:n")
    v.add_argument("--tol", type=float, default=1e-10)
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("rate", parents=[common], help="evaluate a rate function at a vector")
    r.add_argument("--kind", choices=RATE_KINDS, required=True)
    r.add_argument("--x", help="vector file")
    r.set_defaults(func=cmd_rate)

    s = sub.add_parser("study", parents=[common], help="run a convergence or Monte Carlo study")
    s.add_argument("--kind", choices=STUDIES, required=True)
    s.set_defaults(func=cmd_study)

    m = sub.add_parser("simulate", parents=[common], help="simulate an ensemble of final states")
    m.set_defaults(func=cmd_simulate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        _emit({"status": "refused", "reason": "USAGE", "message": "--threads must be >= 1"})
        return EXIT_USAGE
    try:
        return args.func(args)
    except Refusal as exc:
        _emit({"status": "refused", "reason": exc.reason, "message": str(exc), **exc.extra})
        return EXIT_USAGE if exc.reason == "USAGE" else EXIT_REFUSED
    except ConfigError as exc:
        _emit({"status": "refused", "reason": exc.code, "message": str(exc), "line": exc.line})
        return EXIT_CONFIG
    except LDPError as exc:
        _emit({"status": "refused", "reason": exc.code, "message": str(exc)})
        return EXIT_REFUSED
    except OSError as exc:
        _emit({"status": "refused", "reason": "IO_ERROR", "message": str(exc)})
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
