"""Path observables: empirical and fluctuation fields, pair and block
averages, and exact exponential martingales.

Everything that integrates over time does so event by event: between two
swaps the configuration is constant and the control amplitudes are
piecewise linear, so the integrals are exact sums.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .basis import DEFAULT_GRID, TrigSeries, lattice_basis
from .control import ControlField
from .dynamics import Trajectory
from .lattice import Configuration
from .pde import as_density_path, exact_lattice_mean

__all__ = ["empirical_measure", "fluctuation_field", "fluctuation_series", "FluctuationSeries",
           "pair_time_integral", "pair_time_series", "block_average", "replacement_discrepancy",
           "hydrodynamic_pair_integral", "martingale_series", "martingale_field_series",
           "MartingaleSeries", "configurations_at"]


def _occ(c) -> np.ndarray:
    return c.occupancy if isinstance(c, Configuration) else np.asarray(c)


def empirical_measure(c: Configuration, f: TrigSeries) -> float:
    """``(1/N) sum_x eta(x) f(x/N)``."""
    occ = _occ(c)
    return float(occ @ f.on_lattice(occ.size)) / occ.size


def fluctuation_field(c: Configuration, mean, f: TrigSeries, a_n: float) -> float:
    """``(1/a_N) sum_x (eta(x) - mean(x)) f(x/N)``."""
    occ = _occ(c)
    mean = np.asarray(mean, dtype=float)
    if mean.shape != occ.shape:
        raise ValueError(f"mean has length {mean.size}, configuration has {occ.size} sites")
    return float((occ - mean) @ f.on_lattice(occ.size)) / a_n


@dataclass
class FluctuationSeries:
    mode: int
    times: np.ndarray
    values: np.ndarray
    mean_reference: np.ndarray = field(repr=False)


def configurations_at(traj: Trajectory, times) -> np.ndarray:
    """Occupancies at ``times`` from the event list, or from stored snapshots."""
    times = np.asarray(times, dtype=float)
    if traj.recorded:
        return traj.states_at(times)
    idx = np.searchsorted(traj.snapshot_times, times)
    ok = (idx < traj.snapshot_times.size)
    if not ok.all() or not np.array_equal(traj.snapshot_times[idx], times):
        raise ValueError("trajectory was not recorded and has no snapshots at the requested times")
    return traj.snapshots[idx]


def _mode_list(modes) -> list[int]:
    if isinstance(modes, (int, np.integer)):
        return list(range(-int(modes), int(modes) + 1))
    return [int(m) for m in modes]


def fluctuation_series(traj: Trajectory, modes, phi, a_n: float, time_grid) -> list[FluctuationSeries]:
    """``theta_t(e_n)`` for each mode, centred by the exact lattice mean.

    ``modes`` may be a band ``M`` (all ``|n| <= M``) or an explicit list.
    """
    times = np.asarray(time_grid, dtype=float)
    n = traj.n_sites
    occ = configurations_at(traj, times).astype(float)
    mean = exact_lattice_mean(n, phi, times)
    ml = _mode_list(modes)
    E = lattice_basis(ml, n)                      # (modes, N)
    vals = (occ - mean) @ E.T / a_n               # (times, modes)
    return [FluctuationSeries(m, times, vals[:, j].copy(), mean) for j, m in enumerate(ml)]


def _as_control(G) -> ControlField:
    if isinstance(G, ControlField):
        return G
    if isinstance(G, (int, float)):
        return ControlField.constant({0: float(G)})
    return ControlField.constant(G)


def _cumulative_at_knots(G: ControlField) -> np.ndarray:
    return np.ascontiguousarray(G.cumulative(G.knots))


def pair_time_series(traj: Trajectory, G, times) -> np.ndarray:
    """``int_0^t (1/N) sum_x eta_s(x) eta_s(x+1) G_s(x/N) ds`` at each of ``times``."""
    traj._require_events()
    G = _as_control(G)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or times.min() < 0 or times.max() > traj.horizon:
        raise ValueError(f"times must be sorted and lie in [0, {traj.horizon}]")
    n = traj.n_sites
    E, _ = G.lattice_tables(n)
    res = K.pair_integral(traj.initial.occupancy, traj.times, traj.edges, times,
                          G.knots, np.ascontiguousarray(G.amplitudes), _cumulative_at_knots(G),
                          np.ascontiguousarray(E))
    return res / n


def pair_time_integral(traj: Trajectory, G, t: float | None = None) -> float:
    """Exact value of the pair integral on ``[0, t]`` (default the whole horizon)."""
    t = traj.horizon if t is None else t
    return float(pair_time_series(traj, G, [t])[0])


def block_average(c: Configuration, x: int, delta: float) -> float:
    """Mean occupancy over the window ``x - L .. x + L`` with ``L = floor(delta N)``."""
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    occ = _occ(c)
    n = occ.size
    L = int(np.floor(delta * n))
    idx = (int(x) + np.arange(-L, L + 1)) % n
    return float(occ[idx].sum()) / (2 * L + 1)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def hydrodynamic_pair_integral(G, rho, horizon: float, grid: int = DEFAULT_GRID,
                               n_pieces: int = 64) -> float:
    """``int_0^T int rho_s(u)^2 G_s(u) du ds``.

    Trapezoid in space on the torus grid; 8-point Gauss-Legendre on each
    of at least ``n_pieces`` time intervals aligned with the knots of ``G``
    and ``rho``.
    """
    G = _as_control(G)
    rho = as_density_path(rho)
    marks = np.unique(np.concatenate([np.linspace(0.0, horizon, n_pieces + 1),
                                      G.knots, np.asarray(getattr(rho, "knots", []), dtype=float)]))
    marks = marks[(marks >= 0) & (marks <= horizon)]
    total = 0.0
    for a, b in zip(marks[:-1], marks[1:]):
        for xq, wq in zip(_GL_X, _GL_W):
            s = 0.5 * (a + b) + 0.5 * (b - a) * xq
            r = rho.at(s).on_grid(grid)
            total += 0.5 * (b - a) * wq * float(np.mean(r * r * G.at(s).on_grid(grid)))
    return total


def replacement_discrepancy(traj: Trajectory, G, rho, *, hydro_value: float | None = None) -> float:
    """``| pair_time_integral - int int rho^2 G |`` over the trajectory's horizon.

    Pass ``hydro_value`` to reuse a precomputed deterministic term across
    replicas.
    """
    G = _as_control(G)
    target = hydrodynamic_pair_integral(G, rho, traj.horizon) if hydro_value is None else hydro_value
    return abs(pair_time_integral(traj, G) - target)


# -- exponential martingales ---------------------------------------------

@dataclass
class MartingaleSeries:
    """``M_t = (Y_t / Y_0) exp(-int_0^t (d_s + L_N) Y_s / Y_s ds)`` on a time grid.

    ``log_y`` is ``log(Y_t / Y_0)``; ``time_compensator`` and
    ``generator_compensator`` are the integrals of ``d_s Y / Y`` and
    ``L_N Y / Y``; ``jump_sum`` is the sum over swaps of the jumps of
    ``log Y`` and equals ``log_y - time_compensator`` exactly.
    """

    times: np.ndarray
    log_values: np.ndarray
    log_y: np.ndarray
    time_compensator: np.ndarray
    generator_compensator: np.ndarray
    jump_sum: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)

    @property
    def compensator(self) -> np.ndarray:
        return self.time_compensator + self.generator_compensator


def _phi1m1(z: np.ndarray) -> np.ndarray:
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    return np.where(small, z * (0.5 + z * (1.0 / 6.0 + z / 24.0)), (np.expm1(zs) - zs) / zs)


def _w_partial(d0, beta, sigma, r):
    """``int_0^r (exp(sigma (d0 + beta s)) - 1) ds``, vectorised."""
    p = _phi1m1(sigma * beta * r)
    return r * (np.expm1(sigma * d0) * (1.0 + p) + p)


def _edge_tables(F: ControlField, n: int, scale: float):
    E, D = F.lattice_tables(n)
    dk = np.ascontiguousarray((scale * (F.amplitudes @ D)).T)        # (N, K)
    Kn = F.knots.size
    Wp = np.zeros((n, Kn))
    Wm = np.zeros((n, Kn))
    beta = np.zeros((n, Kn))
    if Kn > 1:
        h = np.diff(F.knots)
        beta[:, :-1] = np.diff(dk, axis=1) / h
        Wp[:, 1:] = np.cumsum(_w_partial(dk[:, :-1], beta[:, :-1], 1.0, h), axis=1)
        Wm[:, 1:] = np.cumsum(_w_partial(dk[:, :-1], beta[:, :-1], -1.0, h), axis=1)
    return (np.ascontiguousarray(E), np.ascontiguousarray(D), beta,
            np.expm1(dk), np.expm1(-dk), Wp, Wm)


def martingale_field_series(traj: Trajectory, F: ControlField, phi, a_n: float,
                            time_grid) -> MartingaleSeries:
    """Exponential martingale of ``Y_t = exp((a_N^2/N) theta_t(F_t))``.

    Both compensator pieces are accumulated exactly along the path: the
    ``d_s`` piece from the piecewise-constant occupancy against the
    piecewise-linear amplitudes plus the closed-form change of the lattice
    mean, and the ``L_N`` piece from per-edge closed-form integrals of
    ``exp(sigma_x d_x(s)) - 1`` over each interval during which edge ``x``
    is active.
    """
    traj._require_events()
    times = np.asarray(time_grid, dtype=float)
    if times.size == 0 or np.any(np.diff(times) < 0) or times[0] < 0 or times[-1] > traj.horizon:
        raise ValueError(f"time grid must be sorted and lie in [0, {traj.horizon}]")
    n = traj.n_sites
    scale = a_n / n
    E, D, beta, Xp, Xm, Wp, Wm = _edge_tables(F, n, scale)
    amps = np.ascontiguousarray(F.amplitudes)
    pieces = K.martingale_pieces(traj.initial.occupancy, traj.times, traj.edges, times,
                                 F.knots, amps, D, E, beta, Xp, Xm, Wp, Wm, scale)
    F_lat = F.coefficients(times) @ E                                # (T, N)
    F0 = F.coefficients(0.0) @ E
    mean_t = exact_lattice_mean(n, phi, times)
    mean_0 = exact_lattice_mean(n, phi, 0.0)
    mF_t = np.einsum("tx,tx->t", mean_t, F_lat)
    mF_0 = float(mean_0 @ F0)
    eF_0 = float(traj.initial.occupancy @ F0)
    log_y = scale * ((pieces[:, 0] - mF_t) - (eF_0 - mF_0))
    time_comp = scale * (pieces[:, 1] - (mF_t - mF_0))
    gen_comp = float(n) ** 2 * pieces[:, 2]
    # the centring terms cancel between log_y and time_comp; form log M from
    # the cancelled expression to avoid rounding in large intermediate sums
    log_m = pieces[:, 3] - gen_comp
    return MartingaleSeries(times, log_m, log_y, time_comp, gen_comp, pieces[:, 3].copy())


def martingale_series(traj: Trajectory, f: TrigSeries, c_scale: float, phi, a_n: float,
                      time_grid) -> MartingaleSeries:
    """Exponential martingale of ``Y_t = exp((a_N^2/N) theta_t(c f))`` for a fixed test function."""
    return martingale_field_series(traj, ControlField.constant(f * c_scale), phi, a_n, time_grid)
