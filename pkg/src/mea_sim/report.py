"""Aggregation helpers and byte-stable CSV/JSON output."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidArgument, MeaSimError

Z95 = 1.959963984540054


class OutputError(MeaSimError, OSError):
    pass


@dataclass(frozen=True)
class CdfSeries:
    values: np.ndarray
    probs: np.ndarray

    def validate(self) -> None:
        if len(self.values) == 0:
            raise InvalidArgument("empty CDF")
        if np.any(np.diff(self.values) < 0):
            raise InvalidArgument("CDF values not sorted")
        if np.any(np.diff(self.probs) <= 0) or not math.isclose(self.probs[-1], 1.0):
            raise InvalidArgument("CDF probabilities must rise strictly to 1")


@dataclass(frozen=True)
class SummaryRow:
    mean: float
    std: float
    ci95_low: float
    ci95_high: float
    n: int

    @property
    def half_width(self) -> float:
        return (self.ci95_high - self.ci95_low) / 2.0


def mean_ci(samples) -> tuple[float, tuple[float, float]]:
    """Sample mean with a normal-approximation 95% interval."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise InvalidArgument("mean_ci needs at least one sample")
    m = float(x.mean())
    if x.size == 1:
        return m, (m, m)
    hw = Z95 * float(x.std(ddof=1)) / math.sqrt(x.size)
    return m, (m - hw, m + hw)


def summarize(samples, lo: float = -math.inf, hi: float = math.inf) -> SummaryRow:
    """``mean_ci`` plus std and count; the interval is clipped to ``[lo, hi]``."""
    x = np.asarray(samples, dtype=float)
    m, (a, b) = mean_ci(x)
    std = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return SummaryRow(m, std, max(a, lo), min(b, hi), int(x.size))


def empirical_cdf(samples) -> CdfSeries:
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise InvalidArgument("empirical_cdf needs at least one sample")
    values, counts = np.unique(x, return_counts=True)
    return CdfSeries(values, np.cumsum(counts) / x.size)


@dataclass
class Table:
    filename: str
    header: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)


@dataclass
class ExperimentRecord:
    experiment: str
    tables: list[Table]
    n_drops: int
    fingerprint: str
    extra: dict[str, Any] = field(default_factory=dict)
    cdfs: list[CdfSeries] = field(default_factory=list)  # validated before writing
    wide: dict[str, str] = field(default_factory=dict)  # plot-ready text files


def fmt(v) -> str:
    """Six significant digits for floats; ints and strings verbatim; None as empty."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        s = f"{v:.6g}"
        return "0" if s == "-0" else s
    return str(v)


def _json_value(v):
    s = fmt(v)
    if v is None:
        return None
    if isinstance(v, str):
        return v
    if s in ("nan", "inf", "-inf"):
        return s
    n = float(s)
    return int(n) if isinstance(v, (int, np.integer, bool, np.bool_)) else n


def csv_text(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.header)
    for row in table.rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def write_results(record: ExperimentRecord, out_dir, fmt_name: str = "csv") -> list[Path]:
    """Write one experiment's tables; returns the paths written."""
    for cdf in record.cdfs:
        cdf.validate()
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {out}: {exc}") from exc
    written = []
    if fmt_name == "csv":
        for table in record.tables:
            path = out / table.filename
            atomic_write(path, csv_text(table))
            written.append(path)
        for name, text in sorted(record.wide.items()):
            atomic_write(out / name, text)
            written.append(out / name)
    elif fmt_name == "json":
        doc = {
            "experiment": record.experiment,
            "config_fingerprint": record.fingerprint,
            "n_drops": record.n_drops,
            "tables": {
                t.filename.rsplit(".", 1)[0]: [
                    {k: _json_value(v) for k, v in zip(t.header, row)} for row in t.rows
                ]
                for t in record.tables
            },
        }
        path = out / f"{record.experiment}.json"
        atomic_write(path, json_text(doc))
        written.append(path)
    else:
        raise InvalidArgument(f"unknown output format {fmt_name!r}")
    return written


def wide_table(columns: Sequence[str], keys: Iterable, lookup, key_name: str) -> str:
    """Whitespace-separated table, one column per series, ``#`` header line."""
    lines = ["# " + " ".join([key_name, *columns])]
    for key in keys:
        lines.append(" ".join([fmt(key)] + [fmt(lookup(key, c)) for c in columns]))
    return "\n".join(lines) + "\n"


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def cdf_from_rows(rows: list[dict[str, str]], key: Optional[tuple[str, str]] = None) -> CdfSeries:
    sel = [r for r in rows if key is None or (r["config"], r["patch_kind"]) == key]
    return CdfSeries(np.array([float(r["rate_bps"]) for r in sel]),
                     np.array([float(r["cdf"]) for r in sel]))
