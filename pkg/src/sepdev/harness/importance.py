"""Rare-event probabilities by importance sampling under the tilted dynamics.

Under the tilted law the initial state is drawn from the perturbed product
measure and the path from :func:`~sepdev.dynamics.run_tilted`.  Each
replica is reweighted by

    w = (dP/dP_g)(eta_0) / M_T(F),

which makes ``E_tilted[w 1_O] = P(O)`` exactly.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from ..basis import lattice_basis
from ..control import ControlField
from ..dynamics import run_symmetric, run_tilted
from ..fields import FluctuationSeries, martingale_field_series
from ..pde import exact_lattice_mean
from ..sampling import SeedSpec, as_profile, initial_log_likelihood_ratio, sample_perturbed
from .config import RunConfig

IS_LANE = 1


class FieldEvent:
    """An event defined by a predicate on fluctuation series.

    ``predicate`` receives one :class:`FluctuationSeries` per entry of
    ``modes``, sampled at ``times``.
    """

    def __init__(self, modes: Sequence[int], times: Sequence[float] | None,
                 predicate: Callable[[list[FluctuationSeries]], bool], description: str = "custom"):
        self.modes = [int(m) for m in modes]
        self.times = None if times is None else np.asarray(times, dtype=float)
        self.predicate = predicate
        self.description = description

    def event_times(self, horizon: float) -> np.ndarray:
        return np.array([horizon]) if self.times is None else self.times

    def __call__(self, series: list[FluctuationSeries]) -> bool:
        return bool(self.predicate(series))

    def __repr__(self) -> str:
        return self.description


class ThresholdEvent(FieldEvent):
    """``theta_t(e_mode) > threshold`` at ``time`` (default the horizon); ``below`` flips it."""

    def __init__(self, mode: int, threshold: float, time: float | None = None, below: bool = False):
        self.mode, self.threshold, self.time, self.below = int(mode), float(threshold), time, below
        op = "<" if below else ">"
        at = "T" if time is None else f"{time}"
        super().__init__([mode], None if time is None else [time], self._test,
                         f"theta_{at}(e_{mode}) {op} {threshold}")

    def _test(self, series):
        v = series[0].values[-1]
        return v < self.threshold if self.below else v > self.threshold


class AlwaysEvent(FieldEvent):
    def __init__(self):
        super().__init__([0], None, lambda s: True, "always")


@dataclass
class ISEstimate:
    event: str
    replicas: int
    naive: float
    naive_se: float
    importance: float | None = None
    importance_se: float | None = None
    ess: float | None = None
    mean_weight: float | None = None
    mean_weight_se: float | None = None
    flagged: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ISEstimate":
        return cls(**d)


def _theta_series(event: FieldEvent, occ: np.ndarray, mean: np.ndarray, E: np.ndarray,
                  a_n: float, times: np.ndarray) -> list[FluctuationSeries]:
    vals = (occ - mean) @ E.T / a_n
    return [FluctuationSeries(m, times, vals[:, j], mean) for j, m in enumerate(event.modes)]


def estimate_event(cfg: RunConfig, event: FieldEvent, tilt: tuple | None = None,
                   replicas_is: int | None = None, threads: int | None = None) -> ISEstimate:
    """Naive and importance-sampled estimates of ``P(event)``.

    ``cfg`` must describe the untilted problem: a product initial law and
    the symmetric engine.  ``tilt = (g, F)`` supplies the initial
    perturbation profile and the control field; without it only the naive
    branch runs.  Both branches use ``cfg.replicas`` unless
    ``replicas_is`` is given.  Naive replicas use lane 0 of ``cfg.seed``;
    tilted replicas use lane 1, so they never share random numbers.
    """
    cfg.validate()
    if cfg.initial["kind"] not in ("product", "equilibrium"):
        raise ValueError("estimate_event needs a product initial law")
    n, a_n, T = cfg.n_sites, cfg.a_n, cfg.horizon
    phi = cfg.profile()
    times = event.event_times(T)
    E = lattice_basis(event.modes, n)
    mean = exact_lattice_mean(n, phi, times)

    def naive_one(r):
        s = SeedSpec(cfg.seed, r)
        tr = run_symmetric(cfg.sample_initial(s), T, s, record=False, snapshot_times=times)
        return float(event(_theta_series(event, tr.snapshots.astype(float), mean, E, a_n, times)))

    hits = np.array(_map(naive_one, cfg.replicas, threads, cfg))
    est = ISEstimate(repr(event), cfg.replicas, float(hits.mean()),
                     float(hits.std(ddof=1) / math.sqrt(hits.size)) if hits.size > 1 else math.nan)
    if tilt is None:
        return est

    g, F = tilt
    g = as_profile(g if g is not None else 0.0)
    F = F if F is not None else ControlField.zero()
    R = replicas_is or cfg.replicas

    def tilted_one(r):
        s = SeedSpec(cfg.seed, r, lane=IS_LANE)
        c = sample_perturbed(n, phi, g, a_n, s)
        tr = run_tilted(c, T, F, a_n, s, record=True, snapshot_times=times)
        log_m = martingale_field_series(tr, F, phi, a_n, [T]).log_values[-1]
        logw = initial_log_likelihood_ratio(c, phi, g, a_n) - log_m
        hit = event(_theta_series(event, tr.snapshots.astype(float), mean, E, a_n, times))
        return (logw, float(hit))

    res = np.array(_map(tilted_one, R, threads, cfg))
    w = np.exp(res[:, 0])
    hit = res[:, 1]
    wh = w * hit
    sw, sw2 = float(w.sum()), float((w * w).sum())
    est.importance = float(wh.mean())
    est.importance_se = float(wh.std(ddof=1) / math.sqrt(R)) if R > 1 else math.nan
    est.mean_weight = float(w.mean())
    est.mean_weight_se = float(w.std(ddof=1) / math.sqrt(R)) if R > 1 else math.nan
    est.ess = sw * sw / sw2 if sw2 > 0 else 0.0
    est.flagged = not (math.isfinite(est.ess) and est.ess >= 1.0)
    return est


def _map(fn, count: int, threads: int | None, cfg: RunConfig) -> list:
    from concurrent.futures import ThreadPoolExecutor
    workers = threads if threads is not None else cfg.resolved_threads()
    first = [fn(0)]
    if workers > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return first + list(pool.map(fn, range(1, count), chunksize=64))
    return first + [fn(r) for r in range(1, count)]


def mdp_curve(cfg: RunConfig, sizes: Sequence[int], event: FieldEvent, tilt: tuple | None = None,
              cost: float | Callable[[int], float] | None = None,
              threads: int | None = None) -> list[dict]:
    """Scaled log-probabilities ``(N / a_N^2) log p`` across lattice sizes.

    The estimate is the importance-sampled one when a tilt is given, else
    the naive one.  ``cost`` (a number or a function of ``N``) is the
    caller's candidate-minimiser cost, reported alongside.  This is a
    desk-scale table: nothing here asserts convergence in ``N``.
    """
    rows = []
    for n in sizes:
        c = cfg.replace(n_sites=int(n))
        est = estimate_event(c, event, tilt, threads=threads)
        p, se = (est.importance, est.importance_se) if tilt is not None else (est.naive, est.naive_se)
        speed = n / c.a_n ** 2
        scaled = speed * math.log(p) if p > 0 else -math.inf
        rows.append({"n_sites": int(n), "a_n": c.a_n, "probability": p, "probability_se": se,
                     "scaled_log": scaled,
                     "scaled_log_se": speed * se / p if p > 0 else math.inf,
                     "cost": cost(n) if callable(cost) else cost,
                     "flagged": est.flagged or p <= 0})
    return rows
