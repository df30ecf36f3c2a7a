"""Deterministic solvers on the continuum and lattice torus.

* :func:`solve_heat` and :class:`HeatFlow`: the heat equation
  ``d_t rho = d_uu rho``, exact per Fourier mode.
* :func:`exact_lattice_mean`: ``E eta_t(x)`` for a product initial law,
  exact through the DFT diagonalisation of the discrete Laplacian.
* :func:`solve_controlled`: the linear forced equation
  ``d_t r = d_uu r - 2 d_u(chi_t d_u F_t)`` with ``chi = rho (1 - rho)``
  taken from a supplied density path.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import DEFAULT_GRID, TrigSeries, eigenvalue, torus_grid
from .control import ControlField
from .sampling import as_profile, lattice_values

__all__ = ["solve_heat", "HeatFlow", "DensityPath", "StaticDensity", "exact_lattice_mean",
           "solve_controlled", "conservation_integral", "as_series", "as_density_path",
           "path_coefficients"]

DEFAULT_BAND = 64


def as_series(obj, band: int = DEFAULT_BAND, grid: int = DEFAULT_GRID) -> TrigSeries:
    """Fourier representation of a TrigSeries, Profile, number, spec dict or callable."""
    if isinstance(obj, TrigSeries):
        return obj
    if isinstance(obj, (int, float)):
        return TrigSeries.constant(float(obj))
    return TrigSeries.from_function(as_profile(obj), band, grid)


def solve_heat(phi, t: float, band: int = DEFAULT_BAND) -> TrigSeries:
    """Heat flow of ``phi`` at time ``t``: mode ``m`` decays by ``exp(-(2 pi m)^2 t)``."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    s = as_series(phi, band)
    return TrigSeries(s.coeffs * np.exp(-eigenvalue(s.modes) * t))


class HeatFlow:
    """The heat solution started from ``initial``, evaluable at any time."""

    knots = np.empty(0)

    def __init__(self, initial, band: int = DEFAULT_BAND):
        self.initial = as_series(initial, band)
        self._rates = eigenvalue(self.initial.modes)

    def at(self, t: float) -> TrigSeries:
        if t < 0:
            raise ValueError(f"t must be non-negative, got {t}")
        return TrigSeries(self.initial.coeffs * np.exp(-self._rates * t))

    def path(self, times) -> "DensityPath":
        times = np.asarray(times, dtype=float)
        return DensityPath(times, [self.at(t) for t in times])


class StaticDensity:
    """A time-independent density, usable wherever a density path is expected."""

    knots = np.empty(0)

    def __init__(self, field):
        self.field = as_series(field)

    def at(self, t: float) -> TrigSeries:
        return self.field


def as_density_path(obj):
    if hasattr(obj, "at"):
        return obj
    return StaticDensity(obj)


@dataclass
class DensityPath:
    """Density fields on an increasing time grid, linear in time between entries."""

    times: np.ndarray
    fields: list

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size != len(self.fields):
            raise ValueError("times and fields must have the same length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        band = max(f.band for f in self.fields)
        self.fields = [f.with_band(band) for f in self.fields]
        self._coeffs = np.array([f.coeffs for f in self.fields])

    @property
    def knots(self) -> np.ndarray:
        return self.times

    @property
    def band(self) -> int:
        return self.fields[0].band

    @property
    def coefficients(self) -> np.ndarray:
        """Array ``(len(times), 2 band + 1)``."""
        return self._coeffs

    def at(self, t: float) -> TrigSeries:
        if not self.times[0] - 1e-12 <= t <= self.times[-1] + 1e-12:
            raise ValueError(f"t={t} outside the path's time range "
                             f"[{self.times[0]}, {self.times[-1]}]")
        if self.times.size == 1:
            return self.fields[0]
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2))
        w = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        w = min(max(w, 0.0), 1.0)
        return TrigSeries((1.0 - w) * self._coeffs[k] + w * self._coeffs[k + 1])

    def on_grid(self, n: int = DEFAULT_GRID) -> np.ndarray:
        return np.array([f.on_grid(n) for f in self.fields])

    def range_violation(self, n: int = DEFAULT_GRID) -> float:
        """Largest distance of any grid value outside ``[0, 1]`` (0 when physical)."""
        v = self.on_grid(n)
        return float(max(0.0, -v.min(), v.max() - 1.0))

    def __add__(self, other: "DensityPath") -> "DensityPath":
        if not np.array_equal(self.times, other.times):
            raise ValueError("time grids differ")
        return DensityPath(self.times, [a + b for a, b in zip(self.fields, other.fields)])

    def __sub__(self, other: "DensityPath") -> "DensityPath":
        return self + other.scaled(-1.0)

    def scaled(self, factor: float) -> "DensityPath":
        return DensityPath(self.times, [f * factor for f in self.fields])

    # -- export -----------------------------------------------------------
    def to_csv(self, path, grid: int = 256) -> Path:
        """Write rows ``t, u, value`` on a ``grid``-point spatial grid."""
        path = Path(path)
        u = torus_grid(grid)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "u", "value"])
            for t, f in zip(self.times, self.fields):
                for uu, v in zip(u, f.on_grid(grid)):
                    w.writerow([repr(float(t)), repr(float(uu)), repr(float(v))])
        return path

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "band": self.band,
                "coefficients": self._coeffs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DensityPath":
        return cls(np.array(d["times"]), [TrigSeries(np.array(c)) for c in d["coefficients"]])

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict()))
        return path

    @classmethod
    def from_json(cls, path) -> "DensityPath":
        return cls.from_dict(json.loads(Path(path).read_text()))


def conservation_integral(path: DensityPath) -> np.ndarray:
    """``int rho_t du`` at each time of the path."""
    return np.array([f.mean() for f in path.fields])


def exact_lattice_mean(n_sites: int, phi, t) -> np.ndarray:
    """``E eta_t(x)`` under the symmetric dynamics from a product law with profile ``phi``.

    Solves ``dm/dt = N^2 (m(x+1) + m(x-1) - 2 m(x))`` exactly: DFT mode ``k``
    decays at rate ``N^2 (2 - 2 cos(2 pi k / N))``.  ``t`` may be a scalar
    (result shape ``(N,)``) or an array (shape ``(len(t), N)``).
    """
    m0 = phi if isinstance(phi, np.ndarray) else lattice_values(n_sites, phi)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be non-negative")
    k = np.arange(n_sites // 2 + 1)
    rate = float(n_sites) ** 2 * (2.0 - 2.0 * np.cos(2.0 * np.pi * k / n_sites))
    X = np.fft.rfft(m0)
    out = np.fft.irfft(X[None, :] * np.exp(-np.outer(t_arr.ravel(), rate)), n_sites)
    return out[0] if t_arr.ndim == 0 else out.reshape(t_arr.shape + (n_sites,))


# -- controlled equation ----------------------------------------------------

_Q = 8
_NODES = 0.5 * (1.0 - np.cos(np.pi * (np.arange(_Q) + 0.5) / _Q))   # Chebyshev on [0, 1]
_VINV = np.linalg.inv(np.vander(_NODES, _Q, increasing=True))


def _exp_moments(z: np.ndarray) -> np.ndarray:
    """``I_k(z) = int_0^1 exp(-z (1 - s)) s^k ds`` for ``k < _Q``; shape ``(len(z), _Q)``."""
    z = np.asarray(z, dtype=float)
    out = np.empty((z.size, _Q))
    big = z >= _Q
    if np.any(big):
        zb = z[big]
        cur = -np.expm1(-zb) / zb
        out[big, 0] = cur
        for k in range(1, _Q):
            cur = (1.0 - k * cur) / zb
            out[big, k] = cur
    small = ~big
    if np.any(small):
        zs = z[small]
        for k in range(_Q):
            # k! sum_j (-z)^j / (j + k + 1)!
            term = np.full(zs.size, 1.0 / (k + 1))
            acc = term.copy()
            for j in range(1, 80):
                term = term * (-zs) / (j + k + 1)
                acc += term
            out[small, k] = acc
    return out


def _source(F: ControlField, rho, t: float, band: int, grid: int) -> np.ndarray:
    """Coefficients of ``-2 d_u(chi_t d_u F_t)``."""
    r = rho.at(t).on_grid(grid)
    chi = r * (1.0 - r)
    dF = F.at(t).derivative().on_grid(grid)
    flux = TrigSeries.from_grid(chi * dF, band)
    return -2.0 * flux.derivative().coeffs


def solve_controlled(g, F: ControlField, rho, horizon: float, times=None, *,
                     band: int = DEFAULT_BAND, grid: int = DEFAULT_GRID,
                     h_max: float = 1e-3) -> DensityPath:
    """Mild solution of ``d_t r = d_uu r - 2 d_u(rho_t (1 - rho_t) d_u F_t)``, ``r_0 = g``.

    The source depends only on the supplied ``rho``, so the equation is
    linear with known forcing.  Each Fourier mode is advanced exactly for
    the diffusion part; the forcing is interpolated by a degree-7
    polynomial on every substep and integrated against the exponential
    kernel in closed form.  Substeps never straddle a time knot of ``F`` or
    of ``rho``.

    Parameters
    ----------
    g : initial field (TrigSeries, Profile, number).
    F : ControlField.
    rho : object with ``.at(t) -> TrigSeries`` (HeatFlow, DensityPath), or a
        constant density.
    times : output times in ``[0, horizon]``; default 101 uniform points.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    rho = as_density_path(rho)
    times = np.linspace(0.0, horizon, 101) if times is None else np.asarray(times, dtype=float)
    if times.size == 0 or np.any(np.diff(times) <= 0):
        raise ValueError("output times must be non-empty and strictly increasing")
    if times[0] < 0 or times[-1] > horizon + 1e-12:
        raise ValueError(f"output times must lie in [0, {horizon}]")
    rho_knots = np.asarray(getattr(rho, "knots", np.empty(0)), dtype=float)
    if isinstance(rho, DensityPath) and (rho.times[0] > 0 or rho.times[-1] < times[-1] - 1e-12):
        raise ValueError("density path does not cover the output time range")

    c = as_series(g, band).with_band(band).coeffs.copy()
    lam = eigenvalue(np.arange(-band, band + 1))
    marks = np.unique(np.concatenate([[0.0], times, F.knots, rho_knots]))
    marks = marks[(marks >= 0.0) & (marks <= times[-1])]

    out = []
    oi = 0
    if times[0] == 0.0:
        out.append(TrigSeries(c.copy()))
        oi = 1
    moment_cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    for a, b in zip(marks[:-1], marks[1:]):
        n_sub = max(1, math.ceil((b - a) / h_max - 1e-9))
        edges = np.linspace(a, b, n_sub + 1)
        for t0, t1 in zip(edges[:-1], edges[1:]):
            h = t1 - t0
            key = round(h, 15)
            if key not in moment_cache:
                moment_cache[key] = (np.exp(-lam * h), _exp_moments(lam * h) @ _VINV)
            decay, weights = moment_cache[key]
            S = np.array([_source(F, rho, t0 + h * s, band, grid) for s in _NODES])  # (Q, 2M+1)
            c = decay * c + h * np.einsum("mq,qm->m", weights, S)
        while oi < times.size and abs(times[oi] - b) <= 1e-12:
            out.append(TrigSeries(c.copy()))
            oi += 1
    return DensityPath(times, out)


def path_coefficients(path, s, band: int) -> np.ndarray:
    """Fourier coefficients of ``path.at(s_i)`` padded to ``band``; shape ``(len(s), 2 band + 1)``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros((s.size, 2 * band + 1))
    if isinstance(path, DensityPath):
        b = min(band, path.band)
        cols = path.coefficients[:, path.band - b:path.band + b + 1]
        if path.times.size == 1:
            out[:, band - b:band + b + 1] = cols[0]
        else:
            for j in range(cols.shape[1]):
                out[:, band - b + j] = np.interp(s, path.times, cols[:, j])
        return out
    if isinstance(path, HeatFlow):
        init = path.initial.with_band(band)
        return init.coeffs[None, :] * np.exp(-np.outer(s, eigenvalue(init.modes)))
    for i, t in enumerate(s):
        out[i] = path.at(float(t)).with_band(band).coeffs
    return out
