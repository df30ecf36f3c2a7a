"""File export with fixed layouts.

CSV headers (column order is part of the format):

* ensemble statistics: ``observable,index,mean,variance,se,count``
* fluctuation series: ``replica,mode,t,value``
* tables (lists of dicts): keys of the first row, in insertion order
* density paths: ``t,u,value``

JSON is written with ``repr``-exact floats, so reading a file back gives
field-identical objects.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from ..fields import FluctuationSeries
from ..pde import DensityPath
from ..rates import RateResult
from .config import RunConfig
from .ensemble import EnsembleStats
from .importance import ISEstimate

STATS_HEADER = ["observable", "index", "mean", "variance", "se", "count"]
SERIES_HEADER = ["replica", "mode", "t", "value"]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> Path:
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _write_json(path: Path, obj) -> Path:
    try:
        path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def series_rows(series_by_replica: Iterable[list[FluctuationSeries]]):
    for r, series in enumerate(series_by_replica):
        for s in series:
            for t, v in zip(s.times, s.values):
                yield (r, s.mode, float(t), float(v))


def export(results, out_dir, name: str, fmt: str = "json") -> Path:
    """Write ``results`` to ``out_dir/name.{json,csv}`` and return the path.

    Accepts EnsembleStats, ISEstimate, RateResult, DensityPath, RunConfig,
    a list of dict rows (a table) or a list of per-replica fluctuation
    series.  Objects without a natural CSV form are written as JSON
    regardless of ``fmt``.
    """
    if fmt not in ("json", "csv"):
        raise ValueError(f"format must be 'json' or 'csv', got {fmt!r}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if isinstance(results, EnsembleStats):
        if fmt == "csv":
            return _write_csv(out / f"{name}.csv", STATS_HEADER, results.rows())
        return _write_json(out / f"{name}.json", results.to_dict())
    if isinstance(results, DensityPath):
        if fmt == "csv":
            return results.to_csv(out / f"{name}.csv")
        return _write_json(out / f"{name}.json", results.to_dict())
    if isinstance(results, list) and results and isinstance(results[0], dict):
        if fmt == "csv":
            header = list(results[0])
            return _write_csv(out / f"{name}.csv", header, ([r[k] for k in header] for r in results))
        return _write_json(out / f"{name}.json", _clean(results))
    if isinstance(results, list) and results and isinstance(results[0], list):
        if fmt == "csv":
            return _write_csv(out / f"{name}.csv", SERIES_HEADER, series_rows(results))
        return _write_json(out / f"{name}.json", [list(r) for r in series_rows(results)])
    if isinstance(results, (ISEstimate, RateResult, RunConfig)):
        return _write_json(out / f"{name}.json", _clean(results.to_dict()))
    if isinstance(results, dict):
        return _write_json(out / f"{name}.json", _clean(results))
    raise TypeError(f"cannot export object of type {type(results).__name__}")


def _clean(obj):
    """Make infinities explicit strings so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def load_stats(path) -> EnsembleStats:
    path = Path(path)
    if path.suffix == ".json":
        return EnsembleStats.from_json(path)
    raise ValueError("only JSON statistics files can be re-imported")
