"""Table writers: RFC-4180 CSV, gnuplot column files, JSON."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from typing import Iterable, Sequence


def fmt(v) -> str:
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        v = v.item()
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if v is None:
        return ""
    return str(v)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def write_dat(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Whitespace-separated columns with a ``#`` header line, for gnuplot ``using``."""
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for r in rows:
            fh.write(" ".join(fmt(v) or "?" for v in r) + "\n")


def jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return fmt(v)
    if isinstance(v, dict):
        return {k: jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if hasattr(v, "item"):
        return jsonable(v.item())
    return v


def write_json(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w") as fh:
        json.dump([dict(zip(header, jsonable(list(r)))) for r in rows], fh, indent=1)
        fh.write("\n")


def sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
