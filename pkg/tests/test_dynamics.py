import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from oracles import direct_tilted_run
from sepdev import (Configuration, ControlField, SeedSpec, TrigSeries, make_configuration,
                    run_symmetric, run_tilted, sample_equilibrium, state_at, tilted_swap_rate)
from sepdev.fields import fluctuation_series
from sepdev.lattice import swap_edge

SIN = ControlField.single_mode(-1, 1.0)


def test_full_lattice_is_frozen():
    tr = run_symmetric(Configuration.from_bits("1111"), 3.0, SeedSpec(0))
    assert tr.n_events == 0 and tr.events == []
    assert state_at(tr, 3.0).bits() == "1111"


def test_replay_matches_event_list():
    c = sample_equilibrium(32, 0.5, SeedSpec(1))
    tr = run_symmetric(c, 0.01, SeedSpec(1))
    assert tr.n_events > 10
    k = tr.n_events // 2
    state = c
    for ev in tr.events[:k]:
        state = swap_edge(state, ev.edge)
    t_mid = 0.5 * (tr.times[k - 1] + tr.times[k])
    assert state_at(tr, t_mid) == state
    assert state_at(tr, 0.0) == c
    final = state_at(tr, tr.horizon)
    assert final == tr.final and final.count == c.count


def test_every_recorded_swap_crosses_an_active_edge():
    c = sample_equilibrium(40, 0.5, SeedSpec(2))
    tr = run_symmetric(c, 0.005, SeedSpec(2))
    state = c.occupancy.copy()
    for t, x in zip(tr.times, tr.edges):
        y = (x + 1) % 40
        assert state[x] != state[y]
        state[x], state[y] = state[y], state[x]
    assert np.all(np.diff(tr.times) > 0)


def test_state_at_rejects_times_outside_horizon():
    tr = run_symmetric(sample_equilibrium(8, 0.5, SeedSpec(3)), 0.1, SeedSpec(3))
    for t in (-1e-9, 0.1 + 1e-9):
        with pytest.raises(ValueError):
            state_at(tr, t)


def test_unrecorded_run_keeps_snapshots_only():
    c = sample_equilibrium(64, 0.5, SeedSpec(4))
    times = [0.001, 0.002, 0.004]
    full = run_symmetric(c, 0.004, SeedSpec(4), snapshot_times=times)
    lean = run_symmetric(c, 0.004, SeedSpec(4), record=False, snapshot_times=times)
    assert lean.n_events == full.n_events
    assert np.array_equal(lean.snapshots, full.states_at(times))
    assert state_at(lean, 0.002) == state_at(full, 0.002)
    with pytest.raises(ValueError):
        lean.events


@given(st.integers(min_value=0, max_value=10_000), st.sampled_from([2, 3, 5, 16, 33]))
@settings(max_examples=25, deadline=None)
def test_both_engines_conserve_particles(seed, n):
    c = sample_equilibrium(n, 0.5, SeedSpec(seed))
    times = np.linspace(0.0, 0.02, 7)
    for tr in (run_symmetric(c, 0.02, SeedSpec(seed)),
               run_tilted(c, 0.02, SIN, 0.5 * n, SeedSpec(seed))):
        assert np.all(tr.states_at(times).sum(axis=1) == c.count)


def test_single_particle_is_a_free_random_walk():
    n, t, R = 1000, 5e-5, 10_000
    c = make_configuration(n, {0})
    disp = np.empty(R)
    for r in range(R):
        tr = run_symmetric(c, t, SeedSpec(5, r))
        pos, d = 0, 0
        for x in tr.edges:
            step = 1 if x == pos else -1
            pos = (pos + step) % n
            d += step
        disp[r] = d
    target = 2 * n * n * t
    sq = disp ** 2
    assert abs(sq.mean() - target) <= 3 * sq.std(ddof=1) / math.sqrt(R)


def test_equilibrium_marginal_is_preserved():
    n, R, alpha = 32, 3000, 0.3
    occ = np.array([run_symmetric(sample_equilibrium(n, alpha, SeedSpec(6, r)), 0.05, SeedSpec(6, r),
                                  record=False).final.occupancy for r in range(R)], dtype=float)
    site = occ[:, 0]
    assert abs(site.mean() - alpha) <= 3 * site.std(ddof=1) / math.sqrt(R)


def test_tilted_rate_examples():
    n = 16
    c = make_configuration(n, {5})         # eta(4)=0, eta(5)=1
    assert tilted_swap_rate(c, 4, 0.0, ControlField.zero(), 8.0) == pytest.approx(n * n)
    F = SIN
    delta = math.sin(2 * math.pi * 4 / n) - math.sin(2 * math.pi * 5 / n)
    assert tilted_swap_rate(c, 4, 0.0, F, 8.0) == pytest.approx(n * n * math.exp(8.0 / n * delta))
    assert tilted_swap_rate(c, 9, 0.0, F, 8.0) == pytest.approx(n * n)


def test_zero_tilt_matches_symmetric_engine_in_law():
    n, R = 16, 10_000
    sym = np.empty(R)
    til = np.empty(R)
    for r in range(R):
        c = sample_equilibrium(n, 0.5, SeedSpec(7, r))
        sym[r] = run_symmetric(c, 0.05, SeedSpec(7, r)).first_event_time()
        til[r] = run_tilted(c, 0.05, ControlField.zero(), 4.0, SeedSpec(8, r)).first_event_time()
    assert stats.ks_2samp(sym, til).pvalue > 0.01


def test_thinning_matches_direct_rate_simulation():
    n, T, R = 12, 0.02, 3000
    a_n = 0.8 * n                      # strong tilt so thinning matters
    F = ControlField.constant(TrigSeries.from_modes({-1: 1.0, 2: 0.5}))
    E, D = F.lattice_tables(n)
    diff = F.amplitudes[0] @ D
    rng = np.random.default_rng(20261014)
    ref_counts, ref_first, counts, first = [], [], [], []
    for r in range(R):
        c = sample_equilibrium(n, 0.5, SeedSpec(9, r))
        k, f = direct_tilted_run(c.occupancy, T, diff, a_n, rng)
        ref_counts.append(k)
        ref_first.append(f)
        tr = run_tilted(c, T, F, a_n, SeedSpec(10, r))
        counts.append(tr.n_events)
        first.append(tr.first_event_time())
    assert stats.ks_2samp(ref_counts, counts).pvalue > 0.01
    fin = np.isfinite(ref_first), np.isfinite(first)
    assert stats.ks_2samp(np.asarray(ref_first)[fin[0]], np.asarray(first)[fin[1]]).pvalue > 0.01
    assert abs(fin[0].mean() - fin[1].mean()) < 0.05


def test_time_reversal_flips_the_drift():
    n, T, R = 64, 0.01, 1000
    a_n = n ** 0.75
    means = {}
    for sign in (1, -1):
        vals = np.empty(R)
        for r in range(R):
            c = sample_equilibrium(n, 0.5, SeedSpec(11, r))
            tr = run_tilted(c, T, SIN.scaled(sign), a_n, SeedSpec(12 + sign, r), record=False,
                            snapshot_times=[T])
            vals[r] = fluctuation_series(tr, [-1], 0.5, a_n, [T])[0].values[0]
        means[sign] = (vals.mean(), vals.std(ddof=1) / math.sqrt(R))
    (mp, sp), (mm, sm) = means[1], means[-1]
    assert mp > 3 * sp and mm < -3 * sm
    assert abs(mp + mm) <= 3 * math.hypot(sp, sm)


def test_envelope_keeps_acceptance_high():
    n = 256
    c = sample_equilibrium(n, 0.5, SeedSpec(13))
    tr = run_tilted(c, 0.005, SIN, n ** 0.75, SeedSpec(13))
    frac = tr.rejections / (tr.rejections + tr.n_events)
    bound = 1 - math.exp(-2 * n ** -0.25 * SIN.max_edge_difference(n))
    assert frac <= bound


def test_horizon_must_be_positive():
    c = sample_equilibrium(8, 0.5, SeedSpec(0))
    with pytest.raises(ValueError):
        run_symmetric(c, 0.0, SeedSpec(0))
