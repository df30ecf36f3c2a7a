"""Space-time control fields ``F(t, u) = sum_m c_m(t) e_m(u)``.

Amplitudes ``c_m(t)`` are piecewise linear between time knots and constant
past the last knot.  That class is closed under everything the engines
and observers need in exact form: ``d/dt F`` is piecewise constant, time
integrals of ``c_m`` are piecewise quadratic, and ``exp`` of a linear
function integrates in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .basis import TrigSeries, basis, basis_derivative, lattice_basis


@dataclass
class ControlField:
    modes: np.ndarray          # (M,) int
    knots: np.ndarray          # (K,) increasing, knots[0] == 0
    amplitudes: np.ndarray     # (K, M)

    def __post_init__(self):
        self.modes = np.atleast_1d(np.asarray(self.modes, dtype=np.int64))
        self.knots = np.atleast_1d(np.asarray(self.knots, dtype=float))
        amps = np.asarray(self.amplitudes, dtype=float)
        if amps.ndim == 1:
            amps = amps.reshape(self.knots.size, self.modes.size)
        self.amplitudes = amps
        if self.knots[0] != 0.0:
            raise ValueError("first time knot must be 0")
        if np.any(np.diff(self.knots) <= 0):
            raise ValueError("time knots must be strictly increasing")
        if amps.shape != (self.knots.size, self.modes.size):
            raise ValueError(f"amplitudes shape {amps.shape} != (knots, modes) "
                             f"{(self.knots.size, self.modes.size)}")

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls) -> "ControlField":
        return cls([0], [0.0], [[0.0]])

    @classmethod
    def constant(cls, f: TrigSeries | dict) -> "ControlField":
        """Time-independent field equal to the series ``f``."""
        if isinstance(f, dict):
            f = TrigSeries.from_modes(f)
        modes = [int(m) for m in f.modes if f.coeff(m) != 0.0] or [0]
        return cls(modes, [0.0], [[f.coeff(m) for m in modes]])

    @classmethod
    def single_mode(cls, mode: int, amplitude: float = 1.0) -> "ControlField":
        return cls([mode], [0.0], [[amplitude]])

    @classmethod
    def from_function(cls, modes: Sequence[int], fn: Callable[[float], Sequence[float]],
                      horizon: float, n_knots: int = 513) -> "ControlField":
        """Tabulate amplitudes ``fn(t) -> (c_m(t))_m`` on ``n_knots`` uniform knots."""
        knots = np.linspace(0.0, horizon, n_knots)
        amps = np.array([np.atleast_1d(fn(t)) for t in knots], dtype=float)
        return cls(modes, knots, amps.reshape(n_knots, len(modes)))

    @classmethod
    def separable(cls, f: TrigSeries, h: Callable[[float], float], horizon: float,
                  n_knots: int = 513) -> "ControlField":
        """``F(t, u) = h(t) f(u)``."""
        modes = [int(m) for m in f.modes if f.coeff(m) != 0.0] or [0]
        base = np.array([f.coeff(m) for m in modes])
        return cls.from_function(modes, lambda t: h(t) * base, horizon, n_knots)

    # -- time structure ---------------------------------------------------
    @property
    def is_time_constant(self) -> bool:
        return self.knots.size == 1 or bool(np.all(self.amplitudes == self.amplitudes[0]))

    def coefficients(self, t) -> np.ndarray:
        """Amplitudes at time(s) ``t``; shape ``(..., M)``."""
        t = np.asarray(t, dtype=float)
        if self.knots.size == 1:
            return np.broadcast_to(self.amplitudes[0], t.shape + (self.modes.size,)).copy()
        cols = [np.interp(t, self.knots, self.amplitudes[:, j]) for j in range(self.modes.size)]
        return np.stack(cols, axis=-1)

    def coefficient_rates(self, t) -> np.ndarray:
        """Right derivative of the amplitudes in time."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros(t.shape + (self.modes.size,))
        if self.knots.size == 1:
            return out
        slopes = np.diff(self.amplitudes, axis=0) / np.diff(self.knots)[:, None]
        k = np.searchsorted(self.knots, t, side="right") - 1
        inside = k < self.knots.size - 1
        out[inside] = slopes[k[inside]]
        return out

    def cumulative(self, t) -> np.ndarray:
        """``int_0^t c_m(s) ds`` (exact for piecewise-linear amplitudes)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.knots.size == 1:
            return t[:, None] * self.amplitudes[0][None, :]
        seg = 0.5 * (self.amplitudes[1:] + self.amplitudes[:-1]) * np.diff(self.knots)[:, None]
        cum = np.vstack([np.zeros(self.modes.size), np.cumsum(seg, axis=0)])
        k = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, self.knots.size - 1)
        c_k = self.amplitudes[k]
        c_t = self.coefficients(t)
        return cum[k] + 0.5 * (c_k + c_t) * (t - self.knots[k])[:, None]

    # -- space evaluation -------------------------------------------------
    def at(self, t: float) -> TrigSeries:
        c = self.coefficients(float(t))
        out = TrigSeries.zeros(int(np.max(np.abs(self.modes))))
        for m, a in zip(self.modes, c):
            out.coeffs[int(m) + out.band] += a
        return out

    def __call__(self, t: float, u):
        c = self.coefficients(float(t))
        return sum(a * basis(int(m), u) for m, a in zip(self.modes, c))

    def du(self, t: float, u):
        c = self.coefficients(float(t))
        return sum(a * basis_derivative(int(m), u) for m, a in zip(self.modes, c))

    def dt(self, t: float, u):
        r = self.coefficient_rates(float(t))[0]
        return sum(a * basis(int(m), u) for m, a in zip(self.modes, r))

    def lattice_tables(self, n_sites: int) -> tuple[np.ndarray, np.ndarray]:
        """``(E, D)`` with ``E[m, x] = e_m(x/N)`` and ``D[m, x] = E[m, x] - E[m, x+1]``."""
        E = lattice_basis(self.modes, n_sites)
        D = E - np.roll(E, -1, axis=1)
        return E, D

    def max_edge_difference(self, n_sites: int) -> float:
        """``max_{t, x} |F_t(x/N) - F_t((x+1)/N)|``.

        Attained at a knot, because the difference is linear in ``t`` between
        knots.
        """
        _, D = self.lattice_tables(n_sites)
        return float(np.max(np.abs(self.amplitudes @ D)))

    def __neg__(self) -> "ControlField":
        return ControlField(self.modes.copy(), self.knots.copy(), -self.amplitudes)

    def scaled(self, factor: float) -> "ControlField":
        return ControlField(self.modes.copy(), self.knots.copy(), factor * self.amplitudes)

    # -- serialisation ----------------------------------------------------
    def to_spec(self) -> dict:
        return {"modes": self.modes.tolist(), "knots": self.knots.tolist(),
                "amplitudes": self.amplitudes.tolist()}

    @classmethod
    def from_spec(cls, spec: dict | None, horizon: float | None = None) -> "ControlField":
        """Parse a control spec.

        Accepted forms: ``None`` (zero); ``{"modes", "knots", "amplitudes"}``;
        ``{"kind": "single_mode", "mode", "amplitude", "decay"}`` giving
        ``amplitude * exp(-decay t) e_mode``.
        """
        if spec is None:
            return cls.zero()
        if "knots" in spec:
            return cls(spec["modes"], spec["knots"], spec["amplitudes"])
        kind = spec.get("kind", "single_mode")
        if kind == "zero":
            return cls.zero()
        if kind == "single_mode":
            mode, amp = int(spec["mode"]), float(spec.get("amplitude", 1.0))
            decay = float(spec.get("decay", 0.0))
            if decay == 0.0:
                return cls.single_mode(mode, amp)
            if horizon is None:
                raise ValueError("time-dependent control needs a horizon")
            n_knots = int(spec.get("n_knots", 513))
            return cls.from_function([mode], lambda t: [amp * np.exp(-decay * t)], horizon, n_knots)
        raise ValueError(f"unknown control kind {kind!r}")
