"""Observation logs, pool manifests, fit results and plot series on disk."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .curation import StrategyReport
from .fitting import FitResult, PoolFit, PoolObservations

OBS_HEADER = ("pool_id", "samples_seen", "error")
ACC_HEADER = ("pool_id", "samples_seen", "accuracy")

_SUFFIX = {"": 1.0, "K": 1e3, "M": 1e6, "B": 1e9, "G": 1e9, "T": 1e12}
_BUDGET_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*([KkMmBbGgTt]?)\s*$")


class InputError(ValueError):
    """A file or argument failed to parse or validate."""


def fmt(v: float) -> str:
    """Nine significant digits; integral sample counts print as integers."""
    v = float(v)
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return f"{v:.9g}"


def round9(v: float) -> float:
    return float(f"{float(v):.9g}")


def parse_budget(text: str) -> float:
    """``"128M"`` -> 128e6. Suffixes K, M, B/G, T are decimal."""
    m = _BUDGET_RE.match(text)
    if not m:
        raise InputError(f"cannot parse budget {text!r}")
    value = float(m.group(1)) * _SUFFIX[m.group(2).upper()]
    if not value > 0:
        raise InputError(f"budget must be positive: {text!r}")
    return value


def parse_budgets(text: str) -> list[float]:
    """Comma list (``32M,64M``) or geometric range ``geom:32M:640M:25``."""
    text = text.strip()
    if text.startswith("geom:"):
        parts = text.split(":")
        if len(parts) != 4:
            raise InputError(f"geometric budgets need geom:LO:HI:COUNT, got {text!r}")
        lo, hi = parse_budget(parts[1]), parse_budget(parts[2])
        try:
            count = int(parts[3])
        except ValueError:
            raise InputError(f"bad budget count in {text!r}") from None
        if count < 1 or hi < lo:
            raise InputError(f"bad geometric range {text!r}")
        values = np.geomspace(lo, hi, count) if count > 1 else np.array([lo])
        return [float(np.round(v)) if v >= 1 else float(v) for v in values]
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise InputError("empty budget list")
    values = [parse_budget(t) for t in items]
    if any(b <= a for a, b in zip(values, values[1:])):
        raise InputError("budgets must be strictly increasing")
    return values


def parse_floats(text: str) -> list[float]:
    """Comma list or ``LO:HI:STEP`` inclusive range."""
    text = text.strip()
    if ":" in text:
        try:
            lo, hi, step = (float(t) for t in text.split(":"))
        except ValueError:
            raise InputError(f"bad range {text!r}") from None
        if step <= 0 or hi < lo:
            raise InputError(f"bad range {text!r}")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return [round(lo + i * step, 12) for i in range(n)]
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"bad number list {text!r}") from None


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write through a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, int, np.floating, np.integer)) else v
                    for v in row])
    return buf.getvalue()


def write_series(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    atomic_write(path, _csv_text(header, rows))


# --- observation logs -------------------------------------------------------


def read_observation_log(path, accuracy: bool = False) -> dict[str, list[tuple[float, float]]]:
    """Rows grouped by pool id, in file order.

    With ``accuracy`` the third column is named ``accuracy`` and converted to
    error as ``1 - value``.
    """
    expected = ACC_HEADER if accuracy else OBS_HEADER
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: cannot read: {exc}") from None
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError(f"{path}: empty file") from None
    if tuple(header) != expected:
        bad = [f"{got!r} (expected {want!r})"
               for got, want in zip(header + [""] * len(expected), expected) if got != want]
        extra = header[len(expected):]
        detail = "; ".join(bad + [f"unexpected column {c!r}" for c in extra])
        raise InputError(f"{path}:1: bad header column {detail}")

    pools: dict[str, list[tuple[float, float]]] = {}
    prev = None
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise InputError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        pid, ns, vs = (c.strip() for c in row)
        if not pid:
            raise InputError(f"{path}:{lineno}: empty pool_id")
        try:
            n = float(ns)
        except ValueError:
            raise InputError(f"{path}:{lineno}: samples_seen {ns!r} is not a number") from None
        try:
            v = float(vs)
        except ValueError:
            raise InputError(f"{path}:{lineno}: {expected[2]} {vs!r} is not a number") from None
        if not (n > 0 and math.isfinite(n)):
            raise InputError(f"{path}:{lineno}: samples_seen must be positive, got {ns}")
        if not 0 <= v <= 1:
            raise InputError(f"{path}:{lineno}: {expected[2]} must lie in [0, 1], got {vs}")
        key = (pid, n)
        if prev is not None:
            if key == prev:
                raise InputError(f"{path}:{lineno}: duplicate row for ({pid}, {ns})")
            if key < prev:
                raise InputError(f"{path}:{lineno}: rows must be sorted by (pool_id, samples_seen)")
        prev = key
        pools.setdefault(pid, []).append((n, 1.0 - v if accuracy else v))
    if not pools:
        raise InputError(f"{path}: no observation rows")
    return pools


def write_observation_log(path, observations: Sequence[PoolObservations],
                          samples_scale: float = 1.0) -> None:
    rows = []
    for obs in sorted(observations, key=lambda o: o.pool_id):
        for n, e in obs.points:
            rows.append((obs.pool_id, float(np.round(n * samples_scale, 6)), e))
    atomic_write(path, _csv_text(OBS_HEADER, rows))


# --- manifests --------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    pool_id: str
    size: float
    quality_rank: int
    description: str = ""


def read_manifest(path) -> list[ManifestEntry]:
    """Entries ordered by quality rank (1 = best)."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: cannot read: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if isinstance(raw, dict):
        raw = raw.get("pools")
    if not isinstance(raw, list) or not raw:
        raise InputError(f"{path}: manifest must be a non-empty list of pool entries")
    entries = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise InputError(f"{path}: entry {i} is not an object")
        missing = [k for k in ("pool_id", "size", "quality_rank") if k not in item]
        if missing:
            raise InputError(f"{path}: entry {i} lacks {', '.join(missing)}")
        size, rank = item["size"], item["quality_rank"]
        if not isinstance(size, (int, float)) or isinstance(size, bool) or not size > 0:
            raise InputError(f"{path}: entry {i} size must be a positive number")
        if not isinstance(rank, int) or isinstance(rank, bool):
            raise InputError(f"{path}: entry {i} quality_rank must be an integer")
        entries.append(ManifestEntry(str(item["pool_id"]), float(size), rank,
                                     str(item.get("description", ""))))
    ids = [e.pool_id for e in entries]
    if len(set(ids)) != len(ids):
        raise InputError(f"{path}: duplicate pool ids")
    ranks = sorted(e.quality_rank for e in entries)
    if ranks != list(range(1, len(entries) + 1)):
        raise InputError(f"{path}: quality_rank must be unique and contiguous from 1, got {ranks}")
    return sorted(entries, key=lambda e: e.quality_rank)


def write_manifest(path, entries: Sequence[ManifestEntry]) -> None:
    data = [{"pool_id": e.pool_id, "size": int(e.size) if float(e.size).is_integer() else e.size,
             "quality_rank": e.quality_rank, "description": e.description}
            for e in sorted(entries, key=lambda e: e.quality_rank)]
    atomic_write(path, json.dumps(data, indent=2) + "\n")


# --- fit results ------------------------------------------------------------


def fit_result_text(fit: FitResult) -> str:
    # repr floats keep the file lossless
    data = {
        "grid_version": fit.grid_version,
        "a": fit.a,
        "pools": [{"pool_id": pid, "b": p.b, "tau": p.tau, "d": p.d, "l2_loss": p.l2_loss}
                  for pid, p in fit.per_pool.items()],
        "total_l2_loss": fit.total_l2_loss,
    }
    return json.dumps(data, indent=2) + "\n"


def write_fit_result(path, fit: FitResult) -> None:
    atomic_write(path, fit_result_text(fit))


def read_fit_result(path) -> FitResult:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        pools = {}
        for p in raw["pools"]:
            pid = str(p["pool_id"])
            if pid in pools:
                raise InputError(f"{path}: duplicate pool {pid!r}")
            pools[pid] = PoolFit(float(p["b"]), float(p["tau"]), float(p["d"]),
                                 float(p["l2_loss"]))
        return FitResult(float(raw["a"]), pools, float(raw["total_l2_loss"]),
                         str(raw["grid_version"]))
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: cannot read: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: malformed fit result: {exc}") from None


# --- strategy reports -------------------------------------------------------


def report_text(report: StrategyReport, metric_name: str, samples_scale: float = 1.0) -> str:
    def n(v):
        v = round9(v * samples_scale)
        return int(v) if v.is_integer() else v

    data = {
        "metric_name": metric_name,
        "strategies": list(report.strategies),
        "budgets": [n(b) for b in report.budgets],
        "per_strategy_error": [[round9(v) for v in row] for row in report.per_strategy_error],
        "best_strategy_per_budget": list(report.best_strategy_per_budget),
        "crossovers": [{"budget_interval": [n(c.budget_interval[0]), n(c.budget_interval[1])],
                        "from_strategy": c.from_strategy, "to_strategy": c.to_strategy}
                       for c in report.crossovers],
    }
    return json.dumps(data, indent=2) + "\n"
