"""Exact simulation of the diffusively rescaled exclusion process.

Both engines run on the macroscopic clock: every edge carries swap rate
``N^2`` (times the tilt factor for :func:`run_tilted`).  Swaps across
edges with equal occupancies are identities, so only active edges enter
the event race.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .control import ControlField
from .lattice import Configuration, edge_activity
from .sampling import SeedSpec, _as_seed

__all__ = ["ControlField", "Event", "Trajectory", "run_symmetric", "run_tilted",
           "tilted_swap_rate", "state_at"]

_MAX_BLOCK = 1 << 20


class Event(NamedTuple):
    time: float
    edge: int


@dataclass
class Trajectory:
    """A piecewise-constant path on ``[0, horizon]``.

    ``times``/``edges`` hold the swaps in order when the run was recorded;
    ``snapshots[i]`` is the configuration at ``snapshot_times[i]`` when
    snapshot times were requested.
    """

    initial: Configuration
    horizon: float
    times: np.ndarray | None
    edges: np.ndarray | None
    n_events: int
    snapshot_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    snapshots: np.ndarray = field(default_factory=lambda: np.empty((0, 0), dtype=np.uint8))
    rejections: int = 0
    final: Configuration | None = None

    @property
    def n_sites(self) -> int:
        return self.initial.n_sites

    @property
    def recorded(self) -> bool:
        return self.times is not None

    @property
    def events(self) -> list[Event]:
        self._require_events()
        return [Event(float(t), int(x)) for t, x in zip(self.times, self.edges)]

    def _require_events(self):
        if not self.recorded:
            raise ValueError("trajectory was run with record=False; events are not available")

    def states_at(self, times) -> np.ndarray:
        """Occupancies at each of ``times`` (sorted), shape ``(len(times), N)``."""
        self._require_events()
        times = np.asarray(times, dtype=float)
        if times.size and (times.min() < 0 or times.max() > self.horizon):
            raise ValueError(f"times must lie in [0, {self.horizon}]")
        order = np.argsort(times, kind="stable")
        out = np.empty((times.size, self.n_sites), dtype=np.uint8)
        K.replay_snapshots(self.initial.occupancy, self.times, self.edges, times[order], out)
        res = np.empty_like(out)
        res[order] = out
        return res

    def first_event_time(self) -> float:
        self._require_events()
        return float(self.times[0]) if self.n_events else math.inf


def state_at(traj: Trajectory, t: float) -> Configuration:
    """Configuration after all events with time ``<= t``."""
    if not 0.0 <= t <= traj.horizon:
        raise ValueError(f"t={t} outside [0, {traj.horizon}]")
    if not traj.recorded:
        hit = np.flatnonzero(traj.snapshot_times == t)
        if hit.size:
            return Configuration(traj.snapshots[hit[0]], _trusted=True)
        traj._require_events()
    return Configuration(traj.states_at([t])[0], _trusted=True)


def _block_size(expected_events: float, per_event: int) -> int:
    n = int(per_event * math.ceil(1.1 * expected_events + 32))
    return max(256 * per_event, min(n, _MAX_BLOCK - _MAX_BLOCK % per_event))


class _Driver:
    """Shared refill/grow loop for both engines."""

    def __init__(self, initial: Configuration, horizon: float, seed, record: bool,
                 snapshot_times, expected_events: float, per_event: int, n_istate: int):
        if horizon <= 0:
            raise ValueError(f"horizon must be positive, got {horizon}")
        self.initial = initial
        self.horizon = float(horizon)
        self.rng = _as_seed(seed).generator("dynamics")
        self.record = bool(record)
        n = initial.n_sites
        self.occ = initial.occupancy.copy()
        self.act = np.empty(n, dtype=np.int64)
        self.pos = np.empty(n, dtype=np.int64)
        n_act = K.build_active(self.occ, self.act, self.pos)
        self.istate = np.zeros(n_istate, dtype=np.int64)
        self.istate[0] = n_act
        self.fstate = np.zeros(1)
        st = np.sort(np.asarray(snapshot_times if snapshot_times is not None else [], dtype=float))
        if st.size and (st[0] < 0 or st[-1] > self.horizon):
            raise ValueError(f"snapshot times must lie in [0, {self.horizon}]")
        self.snap_t = st
        self.snaps = np.zeros((st.size, n), dtype=np.uint8)
        cap = int(1.2 * expected_events) + 16 if self.record else 1
        self.ev_t = np.empty(cap)
        self.ev_x = np.empty(cap, dtype=np.int32)
        self.block = _block_size(expected_events, per_event)
        self.per_event = per_event

    def run(self, step) -> Trajectory:
        buf = self.rng.random(self.block)
        start = 0
        while True:
            status, used = step(buf[start:])
            start += used
            if status == K.DONE:
                break
            if status == K.NEED_RANDOMS:
                buf = self.rng.random(self.block)
                start = 0
            elif status == K.NEED_STORAGE:
                self.ev_t = np.concatenate([self.ev_t, np.empty(self.ev_t.size)])
                self.ev_x = np.concatenate([self.ev_x, np.empty(self.ev_x.size, dtype=np.int32)])
            elif status == K.ENVELOPE_VIOLATED:
                raise RuntimeError("thinning envelope violated: tilted rate exceeded its bound")
        n_ev = int(self.istate[1])
        return Trajectory(
            initial=self.initial,
            horizon=self.horizon,
            times=self.ev_t[:n_ev].copy() if self.record else None,
            edges=self.ev_x[:n_ev].copy() if self.record else None,
            n_events=n_ev,
            snapshot_times=self.snap_t,
            snapshots=self.snaps,
            rejections=int(self.istate[4]) if self.istate.size > 4 else 0,
            final=Configuration(self.occ, _trusted=True),
        )


def run_symmetric(initial: Configuration, horizon: float, seed: SeedSpec | int, *,
                  record: bool = True, snapshot_times=None) -> Trajectory:
    """Sample the symmetric exclusion process on ``[0, horizon]``.

    An exact continuous-time jump chain: total rate ``N^2 * |active edges|``,
    exponential holding times, uniformly chosen active edge.

    Parameters
    ----------
    record : bool
        Keep the event list.  With ``record=False`` only the final state and
        the requested snapshots are returned.
    snapshot_times : array-like, optional
        Times at which to store the configuration during the run.
    """
    n = initial.n_sites
    rate = float(n) ** 2
    n_act0 = int(edge_activity(initial.occupancy).sum())
    d = _Driver(initial, horizon, seed, record, snapshot_times,
                expected_events=rate * horizon * max(n_act0, 1), per_event=2, n_istate=3)

    def step(buf):
        return K.symmetric_chunk(d.occ, d.act, d.pos, d.istate, d.fstate, d.horizon, rate, buf,
                                 d.ev_t, d.ev_x, d.record, d.snap_t, d.snaps)

    return d.run(step)


def tilted_swap_rate(c: Configuration, x: int, t: float, F: ControlField, a_n: float,
                     n_sites: int | None = None) -> float:
    """``N^2 exp((a_N/N) (eta(x+1) - eta(x)) (F_t(x/N) - F_t((x+1)/N)))``."""
    n = c.n_sites if n_sites is None else n_sites
    x = x % n
    y = (x + 1) % n
    sigma = int(c.occupancy[y]) - int(c.occupancy[x])
    if sigma == 0:
        return float(n) ** 2
    _, D = F.lattice_tables(n)
    diff = float(F.coefficients(t) @ D[:, x])
    return float(n) ** 2 * math.exp((a_n / n) * sigma * diff)


def run_tilted(initial: Configuration, horizon: float, F: ControlField, a_n: float,
               seed: SeedSpec | int, *, record: bool = True, snapshot_times=None) -> Trajectory:
    """Sample the exclusion process with tilted rates :func:`tilted_swap_rate`.

    Exact in law by thinning: candidates are generated at the dominating
    rate ``N^2 exp(kappa) |active edges|`` with
    ``kappa = (a_N/N) max_{t,x} |F_t(x/N) - F_t((x+1)/N)|`` and accepted with
    probability ``rate / (N^2 exp(kappa))`` evaluated at the candidate time.
    """
    n = initial.n_sites
    rate = float(n) ** 2
    scale = a_n / n
    _, D = F.lattice_tables(n)
    kappa = scale * F.max_edge_difference(n)
    n_act0 = int(edge_activity(initial.occupancy).sum())
    d = _Driver(initial, horizon, seed, record, snapshot_times,
                expected_events=rate * math.exp(kappa) * horizon * max(n_act0, 1),
                per_event=3, n_istate=5)
    knots = F.knots
    amps = np.ascontiguousarray(F.amplitudes)
    D = np.ascontiguousarray(D)

    def step(buf):
        return K.tilted_chunk(d.occ, d.act, d.pos, d.istate, d.fstate, d.horizon, rate, buf,
                              d.ev_t, d.ev_x, d.record, d.snap_t, d.snaps,
                              knots, amps, D, scale, kappa)

    return d.run(step)
