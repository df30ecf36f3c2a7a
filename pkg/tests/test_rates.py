import math

import numpy as np
import pytest
from scipy.integrate import quad

from oracles import bernoulli_relative_entropy
from sepdev import ControlField, Profile, TrigSeries
from sepdev.pde import DensityPath, HeatFlow, solve_controlled
from sepdev.rates import (RateResult, SusceptibilityPath, i_dyn_closed_form, i_dyn_variational,
                          i_ini_closed_form, i_ini_variational, j_dyn_variational, j_ini_variational,
                          mdp_cost)

HALF = Profile.constant(0.5)
COSINE = Profile.cosine(0.5, 0.25)
QUARTER = SusceptibilityPath.constant(0.25)
T = 0.02
SIN = ControlField.single_mode(-1)

# frozen from the 40-digit Decimal evaluation in oracles.bernoulli_relative_entropy
J_THREE_QUARTERS = 0.13081203594113697

BAND_LIMITED_G = [
    TrigSeries.constant(0.3),
    TrigSeries.single(1, 1.0),
    TrigSeries.from_modes({-1: 0.5, 2: 0.2}),
    TrigSeries.from_modes({0: 0.1, 3: -0.4, -5: 0.3}),
    TrigSeries.from_modes({1: 0.2, -1: 0.2, 4: 0.1, -8: 0.05}),
]


def controlled_path(F, horizon=T, points=1025, g=0.0):
    return solve_controlled(g, F, HeatFlow(0.5), horizon, np.linspace(0.0, horizon, points))


# -- initial-state functionals ------------------------------------------

def test_zero_signed_field_costs_nothing():
    r = i_ini_variational(TrigSeries.zeros(2), HALF, 4)
    assert r.value == 0.0
    assert np.all(r.optimizer["coefficients"] == 0.0)


@pytest.mark.parametrize("c", [0.2, 1.0, -1.7])
def test_constant_density_closed_form(c):
    assert i_ini_variational(TrigSeries.constant(c), HALF, 4).value == pytest.approx(2 * c * c, abs=1e-10)
    assert i_ini_closed_form(TrigSeries.constant(c), HALF) == pytest.approx(2 * c * c, abs=1e-12)


def test_cosine_density_costs_one():
    assert i_ini_variational(TrigSeries.single(1, 1.0), HALF, 4).value == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("g", BAND_LIMITED_G, ids=lambda g: f"band{g.band}")
def test_initial_duality_against_adaptive_quadrature(g):
    ref = 0.5 * quad(lambda u: g(u) ** 2 / (COSINE(u) * (1 - COSINE(u))), 0.0, 1.0,
                     epsabs=1e-13, limit=200)[0]
    assert i_ini_variational(g, COSINE, 32).value == pytest.approx(ref, abs=1e-8)
    assert i_ini_closed_form(g, COSINE) == pytest.approx(ref, abs=1e-10)


def test_initial_value_is_nondecreasing_in_band():
    g = TrigSeries.from_modes({1: 0.4, -3: 0.2})
    phi = Profile.cosine(0.5, 0.45)
    vals = [i_ini_variational(g, phi, b).value for b in (3, 4, 6, 10, 20)]
    assert all(b >= a - 1e-14 for a, b in zip(vals, vals[1:]))


def test_initial_band_below_nu_is_rejected():
    with pytest.raises(ValueError, match="band"):
        i_ini_variational(TrigSeries.single(5, 1.0), HALF, 3)


def test_initial_value_scales_quadratically():
    g = BAND_LIMITED_G[3]
    base = i_ini_variational(g, COSINE, 16).value
    for lam in (0.5, 2.0):
        assert i_ini_variational(g * lam, COSINE, 16).value == pytest.approx(lam * lam * base, rel=1e-12)


def test_relative_entropy_examples():
    assert j_ini_variational(COSINE, COSINE).value == pytest.approx(0.0, abs=1e-15)
    r = j_ini_variational(Profile.constant(0.75), HALF)
    assert r.value == pytest.approx(J_THREE_QUARTERS, rel=1e-14)
    assert float(bernoulli_relative_entropy("0.75", "0.5")) == pytest.approx(J_THREE_QUARTERS, rel=1e-15)
    assert r.diagnostics["pointwise_sup"] == pytest.approx(r.value, abs=1e-8)


def test_pointwise_optimisation_agrees_with_entropy_formula():
    for p in (Profile.cosine(0.4, 0.3), Profile.cosine(0.6, 0.35, mode=3)):
        r = j_ini_variational(p, COSINE)
        assert abs(r.diagnostics["pointwise_sup"] - r.value) <= 1e-8


def test_sharpening_increases_relative_entropy():
    def clipped(eps):
        return Profile(lambda u: np.clip(np.where(np.asarray(u) < 0.5, 1.0, 0.0), eps, 1 - eps))
    vals = [j_ini_variational(clipped(eps), HALF).value for eps in (0.2, 0.1, 0.01, 1e-4, 0.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(math.log(2), rel=1e-12)


def test_relative_entropy_rejects_densities_outside_unit_interval():
    with pytest.raises(ValueError, match="outside"):
        j_ini_variational(Profile.cosine(0.5, 0.6), HALF)


# -- path functionals ---------------------------------------------------

def test_zero_path_costs_nothing():
    W = controlled_path(ControlField.zero(), points=5)
    assert np.max(np.abs(W.coefficients)) == 0.0
    assert i_dyn_variational(W, QUARTER, 8, np.linspace(0.0, T, 5)).value == pytest.approx(0.0, abs=1e-15)


def test_dynamic_closed_form_for_sine_control():
    assert i_dyn_closed_form(SIN, QUARTER, T) == pytest.approx(T * math.pi ** 2 / 2, rel=1e-12)


def test_controlled_path_cost_matches_closed_form():
    W = controlled_path(SIN)
    r = i_dyn_variational(W, QUARTER, 16, np.linspace(0.0, T, 9))
    exact = T * math.pi ** 2 / 2
    assert abs(r.value - exact) <= 0.01 * exact
    assert abs(r.diagnostics["half_resolution_value"] - exact) <= 0.01 * exact


def test_time_dependent_control_converges_at_first_order_or_better():
    F = ControlField.separable(TrigSeries.single(-1, 1.0), lambda t: math.cos(150 * t), T, 2049)
    W = controlled_path(F)
    exact = i_dyn_closed_form(F, QUARTER, T)
    errs = [abs(i_dyn_variational(W, QUARTER, 16, np.linspace(0.0, T, J)).value - exact)
            for J in (3, 5, 9, 17)]
    assert errs[-1] <= 0.01 * exact
    for coarse, fine in zip(errs, errs[1:]):
        assert coarse / fine >= 2.0


def test_reversed_control_gives_the_same_cost():
    tg = np.linspace(0.0, T, 9)
    plus = controlled_path(SIN, points=257)
    minus = controlled_path(-SIN, points=257)
    assert np.allclose(minus.coefficients, -plus.coefficients, atol=1e-15)
    a = i_dyn_variational(plus, QUARTER, 8, tg).value
    b = i_dyn_variational(plus.scaled(-1.0), QUARTER, 8, tg).value
    assert b == pytest.approx(a, rel=1e-12)


def test_dynamic_value_is_nondecreasing_in_band():
    F = ControlField.constant(TrigSeries.from_modes({-1: 1.0, 3: 0.3}))
    W = controlled_path(F, points=257)
    tg = np.linspace(0.0, T, 5)
    chi = SusceptibilityPath.from_density(HeatFlow(COSINE))
    vals = [i_dyn_variational(W, chi, b, tg).value for b in (1, 2, 3, 6)]
    assert all(b >= a - 1e-14 for a, b in zip(vals, vals[1:]))


def test_mass_changing_path_is_infinite():
    times = np.array([0.0, T])
    W = DensityPath(times, [TrigSeries.zeros(1), TrigSeries.constant(0.1, band=1)])
    r = i_dyn_variational(W, QUARTER, 1, times)
    assert r.infinite and r.value == math.inf


def test_negative_susceptibility_is_rejected():
    with pytest.raises(ValueError, match="negative"):
        SusceptibilityPath.constant(-0.01)


def test_hydrodynamic_path_has_zero_large_deviation_cost():
    mu = HeatFlow(COSINE)
    r = j_dyn_variational(mu, 8, np.linspace(0.0, T, 9))
    assert abs(r.value) <= 1e-8


def test_perturbed_constant_path_has_positive_cost():
    eps, alpha = 0.05, 0.5
    times = np.linspace(0.0, T, 33)
    W = DensityPath(times, [TrigSeries.from_modes({0: alpha, 1: eps * (1 - t / T)}) for t in times])
    assert j_dyn_variational(W, 16, np.linspace(0.0, T, 9)).value > 1e-6


def test_density_outside_unit_interval_is_infinite():
    times = np.array([0.0, T])
    W = DensityPath(times, [TrigSeries.from_modes({0: 0.5, 1: 0.7})] * 2)
    r = j_dyn_variational(W, 2, times)
    assert r.infinite and "leaves" in r.diagnostics["reason"]


# -- combined cost -------------------------------------------------------

def test_combined_cost_of_zero_path():
    W = controlled_path(ControlField.zero(), points=5)
    assert mdp_cost(W, TrigSeries.zeros(1), HALF, QUARTER, 4, np.linspace(0.0, T, 5)) == pytest.approx(0.0, abs=1e-15)


def test_combined_cost_matches_both_closed_forms():
    g = TrigSeries.single(1, 0.3)
    W = controlled_path(SIN, g=g)
    tg = np.linspace(0.0, T, 9)
    cost = mdp_cost(W, g, HALF, QUARTER, 16, tg)
    expected = i_ini_closed_form(g, HALF) + i_dyn_closed_form(SIN, QUARTER, T)
    assert cost == pytest.approx(expected, rel=1e-3)
    for lam in (0.5, 2.0):
        Wl = controlled_path(SIN.scaled(lam), g=g * lam)
        assert mdp_cost(Wl, g * lam, HALF, QUARTER, 16, tg) == pytest.approx(lam * lam * cost, rel=1e-10)


def test_combined_cost_rejects_inconsistent_start():
    W = controlled_path(SIN, points=5)
    with pytest.raises(ValueError, match="W_0"):
        mdp_cost(W, TrigSeries.single(1, 0.3), HALF, QUARTER, 4, np.linspace(0.0, T, 5))


def test_rate_result_round_trips(tmp_path):
    r = i_dyn_variational(controlled_path(SIN, points=65), QUARTER, 4, np.linspace(0.0, T, 5))
    back = RateResult.from_json(r.to_json(tmp_path / "r.json"))
    assert back.value == r.value and back.band == 4 and not back.infinite
    assert np.array_equal(np.asarray(back.optimizer["coefficients"]), r.optimizer["coefficients"])
    inf = RateResult.infinity(2, 64, "test")
    again = RateResult.from_json(inf.to_json(tmp_path / "i.json"))
    assert again.infinite and again.value == math.inf and again.diagnostics["reason"] == "test"
