import math

import numpy as np
import pytest

from oracles import brownian_heat, controlled_finite_difference, crank_nicolson_heat, lattice_mean_expm
from sepdev import ControlField, Profile, TrigSeries
from sepdev.basis import torus_grid
from sepdev.pde import (DensityPath, HeatFlow, conservation_integral, exact_lattice_mean,
                        solve_controlled, solve_heat)

COSINE = Profile.cosine(0.5, 0.25)
LAM = 4 * math.pi ** 2


def test_constant_profile_is_stationary():
    rho = solve_heat(0.3, 0.7)
    assert np.allclose(rho.on_grid(64), 0.3, atol=1e-15)


def test_heat_matches_crank_nicolson():
    u = torus_grid(1024)
    t = 0.01
    spectral = solve_heat(COSINE, t).on_grid(1024)
    assert np.allclose(spectral, 0.5 + 0.25 * math.exp(-LAM * t) * np.cos(2 * np.pi * u), atol=1e-14)
    cn = crank_nicolson_heat(COSINE(u), t, steps=400)
    assert np.max(np.abs(cn - spectral)) <= 1e-6


def test_heat_matches_brownian_representation():
    phi = TrigSeries.from_modes({0: 0.5, 1: 0.2, -2: 0.1, 3: 0.05})
    u = np.linspace(0.0, 1.0, 37, endpoint=False)
    for t in (0.001, 0.01, 0.05):
        assert np.max(np.abs(brownian_heat(phi, u, t) - solve_heat(phi, t)(u))) <= 1e-8


def test_heat_rejects_negative_time():
    with pytest.raises(ValueError):
        solve_heat(COSINE, -0.1)


def test_lattice_mean_of_constant_profile():
    assert np.allclose(exact_lattice_mean(50, 0.4, 0.3), 0.4, atol=1e-15)


def test_two_site_lattice_mean_decays_at_rate_sixteen():
    phi = lambda u: np.where(np.asarray(u) < 0.25, 0.9, 0.2)
    m0 = np.array([0.9, 0.2])
    for t in (0.01, 0.1):
        m = exact_lattice_mean(2, phi, t)
        assert m[0] - m[1] == pytest.approx(0.7 * math.exp(-16 * t), rel=1e-12)
        assert np.allclose(m, lattice_mean_expm(m0, t), atol=1e-13)


def test_lattice_mean_matches_dense_matrix_exponential():
    n = 24
    phi = Profile.grid(np.linspace(0.1, 0.9, n))
    m0 = phi(np.arange(n) / n)
    for t in (0.0005, 0.003):
        assert np.allclose(exact_lattice_mean(n, phi, t), lattice_mean_expm(m0, t), atol=1e-12)


def test_lattice_mean_approaches_continuum_at_second_order():
    t = 0.01
    errs = []
    for n in (64, 128, 256):
        x = np.arange(n) / n
        errs.append(np.max(np.abs(exact_lattice_mean(n, COSINE, t) - solve_heat(COSINE, t)(x))))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.5 < r < 4.5 for r in ratios)


def test_lattice_mean_vectorises_over_times():
    ts = np.array([0.0, 0.001, 0.01])
    block = exact_lattice_mean(32, COSINE, ts)
    assert block.shape == (3, 32)
    for k, t in enumerate(ts):
        assert np.array_equal(block[k], exact_lattice_mean(32, COSINE, t))


def test_zero_control_is_the_heat_flow_of_g():
    g = TrigSeries.from_modes({1: 0.3, -2: 0.1})
    times = np.linspace(0.0, 0.02, 5)
    path = solve_controlled(g, ControlField.zero(), HeatFlow(COSINE), 0.02, times)
    for t in times:
        assert np.allclose(path.at(t).on_grid(256), solve_heat(g, t).on_grid(256), atol=1e-13)


def test_spatially_constant_control_has_no_effect():
    path = solve_controlled(0.0, ControlField.constant({0: 3.0}), HeatFlow(COSINE), 0.01)
    assert np.max(np.abs(path.on_grid(128))) == 0.0


def test_single_mode_control_closed_form():
    times = np.linspace(0.0, 0.02, 9)
    path = solve_controlled(0.0, ControlField.single_mode(-1), HeatFlow(0.5), 0.02, times)
    for t in times:
        a = 0.5 * (1 - math.exp(-LAM * t))
        assert path.at(t).coeff(-1) == pytest.approx(a, abs=1e-12)
        rest = path.at(t).with_band(8)
        rest_coeffs = [rest.coeff(m) for m in rest.modes if m != -1]
        assert np.max(np.abs(rest_coeffs)) <= 1e-13


def test_single_mode_control_matches_finite_differences():
    t = 0.02
    F_u = lambda u: 2 * math.pi * np.cos(2 * np.pi * u)
    # Richardson extrapolation of two second-order grids
    coarse = controlled_finite_difference(0.25, F_u, t, n=512, steps=2000)
    fine = controlled_finite_difference(0.25, F_u, t, n=1024, steps=2000)
    extrap = (4 * fine[::2] - coarse) / 3
    spectral = solve_controlled(0.0, ControlField.single_mode(-1), HeatFlow(0.5), t, [0.0, t]).at(t)
    assert np.max(np.abs(extrap - spectral.on_grid(512))) <= 1e-6


def test_time_dependent_control_matches_closed_form():
    # F(t, u) = e^{-3t} sin(2 pi u) on rho = 1/2: a' = -lam a + 2 pi^2 e^{-3t}
    T = 0.03
    F = ControlField.separable(TrigSeries.single(-1, 1.0), lambda t: math.exp(-3 * t), T, 4097)
    a_num = solve_controlled(0.0, F, HeatFlow(0.5), T, [0.0, T]).at(T).coeff(-1)
    c = 2 * math.pi ** 2
    exact = c / (LAM - 3) * (math.exp(-3 * T) - math.exp(-LAM * T))
    # piecewise-linear tabulation of e^{-3t} on 4096 intervals
    assert a_num == pytest.approx(exact, rel=1e-8)


def test_conservation_examples():
    times = np.linspace(0.0, 0.05, 6)
    assert np.allclose(conservation_integral(HeatFlow(COSINE).path(times)), 0.5, atol=1e-15)
    F = ControlField.constant({-1: 1.0, 2: 0.4})
    for g in (0.0, TrigSeries.single(1, 1.0)):
        path = solve_controlled(g, F, HeatFlow(COSINE), 0.05, times)
        assert np.max(np.abs(conservation_integral(path))) <= 1e-15


def test_density_path_interpolates_and_rejects_out_of_range():
    path = HeatFlow(COSINE).path([0.0, 0.01])
    mid = path.at(0.005).coeff(1)
    assert mid == pytest.approx(0.25 * 0.5 * (1 + math.exp(-LAM * 0.01)))
    with pytest.raises(ValueError):
        path.at(0.02)


def test_density_path_round_trips(tmp_path):
    path = solve_controlled(0.0, ControlField.single_mode(-1), HeatFlow(COSINE), 0.01,
                            np.linspace(0.0, 0.01, 4))
    back = DensityPath.from_json(path.to_json(tmp_path / "p.json"))
    assert np.array_equal(back.times, path.times)
    assert np.array_equal(back.coefficients, path.coefficients)
    csv = path.to_csv(tmp_path / "p.csv", grid=8).read_text().splitlines()
    assert csv[0] == "t,u,value" and len(csv) == 1 + 4 * 8
