"""INI run configuration with typed keys and line-precise errors.

Example::

    [model]
    alpha = 1.0
    etas = k^-4
    M = 4

    [scheme]
    name = midpoint

    [time]
    tau = 0.1
    N = 1000
"""
from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

from .exceptions import ConfigError
from .schemes import SchemeDef, get_scheme, load_scheme
from .spectral import NoiseSpec, SpectralVector, etas_from_rule


def parse_grid(text: str) -> np.ndarray:
    """``a:b:n`` -> ``n`` evenly spaced points from ``a`` to ``b`` inclusive."""
    parts = text.strip().split(":")
    if len(parts) != 3:
        raise ValueError(f"grid {text!r} is not of the form a:b:n")
    a, b = float(parts[0]), float(parts[1])
    try:
        n = int(parts[2])
    except ValueError:
        raise ValueError(f"grid count {parts[2]!r} is not an integer") from None
    if n < 1:
        raise ValueError("grid needs at least one point")
    return np.linspace(a, b, n)


def _floats(text: str) -> list:
    if ":" in text:
        return [float(v) for v in parse_grid(text)]
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text: str) -> list:
    out = [int(v) for v in text.replace(",", " ").split()]
    return out


def _complexes(text: str) -> list:
    return [complex(v.replace(" ", "")) for v in text.split(",") if v.strip()]


def _vectors(text: str) -> list:
    return [_complexes(v) for v in text.split(";") if v.strip()]


def _etas(text: str):
    t = text.strip()
    if t.startswith("k"):
        etas_from_rule(t, 1)
        return t
    vals = _floats(t)
    if not vals:
        raise ValueError("empty eigenvalue list")
    return vals


def _positive(cast: Callable) -> Callable:
    def f(text):
        v = cast(text)
        if not v > 0:
            raise ValueError(f"must be positive, got {text.strip()}")
        return v
    return f


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise ValueError("must be non-negative")
    return v


SCHEMA: Dict[str, Dict[str, Callable[[str], Any]]] = {
    "model": {"alpha": float, "etas": _etas, "M": _positive(int), "modes": _positive(int),
              "u0": _complexes, "etas2": _etas, "rho": float},
    "scheme": {"name": str.strip, "file": str.strip},
    "time": {"tau": _positive(float), "N": _positive(int), "T": _floats, "taus": _floats, "Ns": _ints},
    "mc": {"samples": _positive(int), "seed": _nonneg_int, "block_size": _positive(int)},
    "observables": {"lambda": _complexes, "R": float, "points": _vectors, "x": _complexes,
                    "Ms": _ints, "eps": _floats, "eps_fraction": _floats, "eigs": _floats,
                    "h_grid": _floats},
}


@dataclass
class RunConfig:
    values: Dict[str, Dict[str, Any]]
    text: str = ""
    lines: Dict[tuple, int] = field(default_factory=dict)
    source: str = "<config>"

    def get(self, section: str, key: str, default: Any = None) -> Any:
        return self.values.get(section, {}).get(key, default)

    def require(self, section: str, key: str) -> Any:
        v = self.get(section, key)
        if v is None:
            raise ConfigError(f"missing required key {key!r} in [{section}]",
                              self.lines.get((section, "__header__")))
        return v

    def line_of(self, section: str, key: str) -> Optional[int]:
        return self.lines.get((section, key))

    def echo(self) -> Dict[str, Dict[str, Any]]:
        """JSON-safe copy of the parsed values."""
        def conv(v):
            if isinstance(v, complex):
                return [v.real, v.imag]
            if isinstance(v, list):
                return [conv(x) for x in v]
            return v
        return {s: {k: conv(v) for k, v in sec.items()} for s, sec in self.values.items()}

    # --- builders ---

    def noise_spec(self) -> NoiseSpec:
        alpha = self.require("model", "alpha")
        M = self.get("model", "M")
        modes = self.get("model", "modes", M)
        etas = self.require("model", "etas")

        def resolve(v, key):
            if isinstance(v, str):
                if modes is None:
                    raise ConfigError("rule-based etas need model.M or model.modes", self.line_of("model", key))
                return etas_from_rule(v, modes)
            if modes is not None and len(v) < modes:
                raise ConfigError(f"{len(v)} eigenvalues given but {modes} modes requested",
                                  self.line_of("model", key))
            return np.asarray(v[:modes] if modes else v, float)

        try:
            e1 = resolve(etas, "etas")
            if self.get("model", "etas2") is not None:
                e2 = resolve(self.get("model", "etas2"), "etas2")
                return NoiseSpec.complex_noise(alpha, e1, e2, self.get("model", "rho", 0.0))
            return NoiseSpec(alpha, e1)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), self.line_of("model", "etas")) from None

    def galerkin_M(self) -> int:
        M = self.get("model", "M")
        return self.noise_spec().n_modes if M is None else M

    def scheme(self) -> SchemeDef:
        f = self.get("scheme", "file")
        if f is not None:
            return load_scheme(f)
        name = self.require("scheme", "name")
        try:
            return get_scheme(name)
        except ValueError as exc:
            raise ConfigError(str(exc), self.line_of("scheme", "name")) from None

    def u0(self, M: int) -> SpectralVector:
        vals = self.get("model", "u0")
        if vals is None:
            return SpectralVector.zeros(M)
        if len(vals) > M:
            raise ConfigError(f"u0 has {len(vals)} modes, more than M={M}", self.line_of("model", "u0"))
        return SpectralVector(np.pad(np.asarray(vals, complex), (0, M - len(vals))))


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"cannot parse: {exc.errors[0][1].strip() if exc.errors else exc}", line) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None

    lines = _line_index(text)
    values: Dict[str, Dict[str, Any]] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", lines.get((section, "__header__")))
        values[section] = {}
        for key, raw in cp[section].items():
            line = lines.get((section, key))
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", line)
            try:
                values[section][key] = SCHEMA[section][key](raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {section}.{key}: {exc}", line) from None
    cfg = RunConfig(values, text, lines, source)
    for key in ("alpha",):
        v = cfg.get("model", key)
        if v is not None and (not math.isfinite(v) or v < 0):
            raise ConfigError("alpha must be finite and non-negative", cfg.line_of("model", key))
    return cfg


def _line_index(text: str) -> Dict[tuple, int]:
    out, current = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            out.setdefault((current, "__header__"), i)
        elif current is not None and "=" in line:
            out.setdefault((current, line.split("=", 1)[0].strip()), i)
    return out


def load_config(path: str) -> RunConfig:
    """Read an INI file, or a run manifest (JSON) that embeds the original config text."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    if path.endswith(".json"):
        try:
            text = json.loads(text)["config_text"]
        except (ValueError, KeyError, TypeError):
            raise ConfigError(f"{path} is not a run manifest with a config_text field") from None
    return parse_config(text, path)
