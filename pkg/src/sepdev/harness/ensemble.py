"""Replica ensembles with order-deterministic aggregation.

Replicas are grouped in fixed blocks of :data:`BLOCK` consecutive indices.
Blocks run on a thread pool (the engine kernels release the GIL), each
block is reduced to ``(count, mean, M2)``, and blocks are merged in index
order.  The partition never depends on the thread count, so results are
bit-identical for any number of workers.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..basis import TrigSeries, lattice_basis
from ..control import ControlField
from ..dynamics import Trajectory, run_symmetric, run_tilted
from ..fields import (hydrodynamic_pair_integral, martingale_field_series, pair_time_series)
from ..pde import HeatFlow, exact_lattice_mean
from ..sampling import SeedSpec
from .config import RunConfig

BLOCK = 128


@dataclass
class EnsembleStats:
    """Per-observable mean, variance (``ddof=1``) and standard error ``sqrt(var / R)``.

    Values of all observables are stored flat; ``groups`` lists
    ``(name, shape)`` in order and the accessors reshape.
    """

    count: int
    groups: list
    mean: np.ndarray
    variance: np.ndarray
    se: np.ndarray
    raw: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def _slice(self, name: str):
        off = 0
        for g, shape in self.groups:
            size = int(np.prod(shape)) if len(shape) else 1
            if g == name:
                return slice(off, off + size), tuple(shape)
            off += size
        raise KeyError(f"no observable named {name!r}; have {[g for g, _ in self.groups]}")

    def _get(self, arr, name):
        sl, shape = self._slice(name)
        return arr[sl].reshape(shape) if shape else float(arr[sl][0])

    def mean_of(self, name: str):
        return self._get(self.mean, name)

    def se_of(self, name: str):
        return self._get(self.se, name)

    def variance_of(self, name: str):
        return self._get(self.variance, name)

    def raw_of(self, name: str) -> np.ndarray:
        if self.raw is None:
            raise ValueError("raw values were not kept (set keep_raw)")
        sl, shape = self._slice(name)
        return self.raw[:, sl].reshape((self.count,) + shape)

    def to_dict(self) -> dict:
        d = {"count": self.count, "groups": [[g, list(s)] for g, s in self.groups],
             "mean": self.mean.tolist(), "variance": self.variance.tolist(), "se": self.se.tolist()}
        if self.raw is not None:
            d["raw"] = self.raw.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleStats":
        raw = np.array(d["raw"], dtype=float) if "raw" in d else None
        return cls(int(d["count"]), [(g, tuple(s)) for g, s in d["groups"]],
                   np.array(d["mean"], dtype=float), np.array(d["variance"], dtype=float),
                   np.array(d["se"], dtype=float), raw)

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict()))
        return path

    @classmethod
    def from_json(cls, path) -> "EnsembleStats":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def rows(self):
        """``(observable, index, mean, variance, se, count)`` per scalar."""
        for g, shape in self.groups:
            sl, _ = self._slice(g)
            for k, i in enumerate(range(sl.start, sl.stop)):
                idx = np.unravel_index(k, shape) if shape else ()
                yield (g, ";".join(str(int(v)) for v in idx), self.mean[i], self.variance[i],
                       self.se[i], self.count)


# -- observables ------------------------------------------------------------

def _control_from(spec, horizon) -> ControlField:
    if spec is None:
        return ControlField.constant({0: 1.0})
    if isinstance(spec, (int, float)):
        return ControlField.constant({0: float(spec)})
    return ControlField.from_spec(spec, horizon)


class _Plan:
    """Everything a replica needs, precomputed once per configuration."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        n = cfg.n_sites
        self.n = n
        self.a_n = cfg.a_n
        self.phi = cfg.profile()
        self.F = cfg.control()
        self.record = False
        self.evaluators: list[Callable] = []
        self.groups: list[tuple[str, tuple]] = []
        snap = set()
        for i, ob in enumerate(cfg.observables):
            ev, shape, needs_events, times = self._build(ob)
            self.evaluators.append(ev)
            self.groups.append((cfg.observable_name(i), shape))
            self.record |= needs_events
            snap.update(times)
        self.snapshot_times = np.array(sorted(snap), dtype=float)
        self.n_values = sum(int(np.prod(s)) if s else 1 for _, s in self.groups)

    def _states(self, traj: Trajectory, times):
        idx = np.searchsorted(self.snapshot_times, times)
        return traj.snapshots[idx]

    def _build(self, ob: dict):
        kind = ob["kind"]
        cfg = self.cfg
        n = self.n
        times = np.asarray(ob.get("times", [cfg.horizon]), dtype=float)
        if kind == "occupancy":
            return (lambda tr: self._states(tr, times).astype(float).ravel(),
                    (times.size, n), False, times)
        if kind == "density":
            return (lambda tr: self._states(tr, times).mean(axis=1), (times.size,), False, times)
        if kind == "pair_frequency":
            def pair(tr):
                s = self._states(tr, times).astype(float)
                return (s * np.roll(s, -1, axis=1)).mean(axis=1)
            return pair, (times.size,), False, times
        if kind in ("empirical", "fluctuation"):
            modes = ob.get("modes", [1])
            modes = list(range(-modes, modes + 1)) if isinstance(modes, int) else [int(m) for m in modes]
            E = lattice_basis(modes, n)
            if kind == "empirical":
                return (lambda tr: (self._states(tr, times).astype(float) @ E.T / n).ravel(),
                        (times.size, len(modes)), False, times)
            mean = exact_lattice_mean(n, self.phi, times)
            a = self.a_n
            return (lambda tr: ((self._states(tr, times) - mean) @ E.T / a).ravel(),
                    (times.size, len(modes)), False, times)
        if kind == "martingale":
            if "control" in ob:
                F = ControlField.from_spec(ob["control"], cfg.horizon)
            else:
                f = TrigSeries.single(int(ob.get("mode", 1)), float(ob.get("c", 1.0)))
                F = ControlField.constant(f)
            stat = ob.get("statistic", "value")

            def mart(tr):
                ms = martingale_field_series(tr, F, self.phi, self.a_n, times)
                if stat == "log":
                    return ms.log_values
                if stat == "inverse":
                    return np.exp(-ms.log_values)
                return ms.values
            return mart, (times.size,), True, ()
        if kind == "pair_integral":
            G = _control_from(ob.get("G"), cfg.horizon)
            return (lambda tr: pair_time_series(tr, G, times), (times.size,), True, ())
        if kind == "replacement":
            G = _control_from(ob.get("G"), cfg.horizon)
            hydro = hydrodynamic_pair_integral(G, HeatFlow(self.phi), cfg.horizon)
            return (lambda tr: np.abs(pair_time_series(tr, G, [cfg.horizon]) - hydro), (), True, ())
        if kind == "event_count":
            return (lambda tr: np.array([float(tr.n_events)]), (), False, ())
        if kind == "first_event_time":
            return (lambda tr: np.array([tr.first_event_time()]), (), True, ())
        raise ValueError(f"unknown observable kind {kind!r}")

    def trajectory(self, r: int) -> Trajectory:
        seed = SeedSpec(self.cfg.seed, r)
        c = self.cfg.sample_initial(seed)
        if self.F is None:
            return run_symmetric(c, self.cfg.horizon, seed, record=self.record,
                                 snapshot_times=self.snapshot_times)
        return run_tilted(c, self.cfg.horizon, self.F, self.a_n, seed, record=self.record,
                          snapshot_times=self.snapshot_times)

    def replica(self, r: int) -> np.ndarray:
        tr = self.trajectory(r)
        out = [np.atleast_1d(np.asarray(ev(tr), dtype=float)) for ev in self.evaluators]
        return np.concatenate(out) if out else np.empty(0)

    def block(self, start: int, stop: int) -> np.ndarray:
        vals = np.empty((stop - start, self.n_values))
        for k, r in enumerate(range(start, stop)):
            vals[k] = self.replica(r)
        return vals


def _reduce(vals: np.ndarray):
    m = vals.mean(axis=0)
    d = vals - m
    return vals.shape[0], m, np.einsum("ij,ij->j", d, d)


def _merge(a, b):
    na, ma, Ma = a
    nb, mb, Mb = b
    n = na + nb
    delta = mb - ma
    return n, ma + delta * (nb / n), Ma + Mb + delta * delta * (na * nb / n)


def run_ensemble(cfg: RunConfig, threads: int | None = None) -> EnsembleStats:
    """Run ``cfg.replicas`` independent replicas and aggregate every observable.

    Replica ``r`` uses ``SeedSpec(cfg.seed, r)``.  The output depends only
    on the configuration, never on ``threads``.
    """
    cfg.validate()
    plan = _Plan(cfg)
    workers = threads if threads is not None else cfg.resolved_threads()
    R = cfg.replicas
    bounds = [(s, min(s + BLOCK, R)) for s in range(0, R, BLOCK)]
    first = plan.block(*bounds[0])          # also compiles kernels before threads start
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rest = list(pool.map(lambda b: plan.block(*b), bounds[1:]))
    else:
        rest = [plan.block(*b) for b in bounds[1:]]
    blocks = [first] + rest
    acc = _reduce(blocks[0])
    for b in blocks[1:]:
        acc = _merge(acc, _reduce(b))
    count, mean, M2 = acc
    var = M2 / (count - 1) if count > 1 else np.full_like(mean, np.nan)
    se = np.sqrt(var / count)
    raw = np.vstack(blocks) if cfg.keep_raw else None
    return EnsembleStats(count, plan.groups, mean, var, se, raw, {"threads": workers})
