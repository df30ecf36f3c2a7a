"""Real trigonometric basis on the unit torus.

Mode ``m >= 0`` is ``cos(2 pi m u)`` and mode ``m < 0`` is ``sin(2 pi |m| u)``.
A :class:`TrigSeries` stores the coefficients of modes ``-M..M`` in a single
array, index ``m + M``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

DEFAULT_GRID = 1024


def basis(mode: int, u) -> np.ndarray:
    """Evaluate the basis function of index ``mode`` at points ``u``."""
    u = np.asarray(u, dtype=float)
    if mode >= 0:
        return np.cos(2.0 * np.pi * mode * u)
    return np.sin(2.0 * np.pi * (-mode) * u)


def basis_derivative(mode: int, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    k = 2.0 * np.pi * abs(mode)
    if mode >= 0:
        return -k * np.sin(k * u)
    return k * np.cos(k * u)


def basis_matrix(modes: Iterable[int], u) -> np.ndarray:
    """Rows are basis functions ``modes`` sampled at ``u``."""
    return np.array([basis(m, u) for m in modes])


def lattice_basis(modes: Iterable[int], n_sites: int) -> np.ndarray:
    """Basis functions at the lattice points ``x/N``, shape ``(len(modes), N)``.

    Evaluated from integer phases so that ``e_m(x/N)`` is exact to rounding
    for every ``x`` (no accumulation of ``2 pi x / N``).
    """
    x = np.arange(n_sites)
    rows = []
    for m in modes:
        phase = 2.0 * np.pi * ((abs(m) * x) % n_sites) / n_sites
        rows.append(np.cos(phase) if m >= 0 else np.sin(phase))
    return np.array(rows, dtype=float).reshape(-1, n_sites)


def eigenvalue(mode) -> np.ndarray:
    """``(2 pi m)^2``: minus the eigenvalue of the second derivative."""
    return (2.0 * np.pi * np.asarray(mode, dtype=float)) ** 2


def torus_grid(n: int = DEFAULT_GRID) -> np.ndarray:
    return np.arange(n) / n


def norm_squared(mode: int) -> float:
    """``int e_m^2 du``."""
    return 1.0 if mode == 0 else 0.5


@dataclass
class TrigSeries:
    """A band-limited real function on the torus.

    Used for densities, test functions, and signed fields alike.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size % 2 != 1:
            raise ValueError("coefficient vector must have odd length 2M+1")
        self.coeffs = c

    # -- construction -----------------------------------------------------
    @classmethod
    def zeros(cls, band: int) -> "TrigSeries":
        return cls(np.zeros(2 * band + 1))

    @classmethod
    def constant(cls, value: float, band: int = 0) -> "TrigSeries":
        s = cls.zeros(band)
        s.coeffs[band] = value
        return s

    @classmethod
    def single(cls, mode: int, amplitude: float = 1.0, band: int | None = None) -> "TrigSeries":
        band = abs(mode) if band is None else band
        if abs(mode) > band:
            raise ValueError(f"mode {mode} exceeds band {band}")
        s = cls.zeros(band)
        s.coeffs[mode + band] = amplitude
        return s

    @classmethod
    def from_modes(cls, modes: dict[int, float], band: int | None = None) -> "TrigSeries":
        band = max((abs(m) for m in modes), default=0) if band is None else band
        s = cls.zeros(band)
        for m, a in modes.items():
            s.coeffs[m + band] += a
        return s

    @classmethod
    def from_grid(cls, values, band: int) -> "TrigSeries":
        """Project uniform-grid samples onto modes ``|m| <= band``."""
        values = np.asarray(values, dtype=float)
        n = values.size
        if 2 * band >= n:
            raise ValueError(f"grid of {n} points cannot resolve band {band}")
        X = np.fft.rfft(values) / n
        c = np.zeros(2 * band + 1)
        c[band] = X[0].real
        k = np.arange(1, band + 1)
        c[band + k] = 2.0 * X[k].real
        c[band - k] = -2.0 * X[k].imag
        return cls(c)

    @classmethod
    def from_function(cls, fn: Callable, band: int, grid: int = DEFAULT_GRID) -> "TrigSeries":
        return cls.from_grid(fn(torus_grid(grid)), band)

    # -- structure --------------------------------------------------------
    @property
    def band(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.band, self.band + 1)

    def coeff(self, mode: int) -> float:
        return float(self.coeffs[mode + self.band]) if abs(mode) <= self.band else 0.0

    def highest_mode(self, tol: float = 0.0) -> int:
        nz = np.nonzero(np.abs(self.coeffs) > tol)[0]
        if nz.size == 0:
            return 0
        return int(np.max(np.abs(nz - self.band)))

    def with_band(self, band: int) -> "TrigSeries":
        """Zero-pad or truncate to ``band``."""
        out = TrigSeries.zeros(band)
        b = min(band, self.band)
        out.coeffs[band - b:band + b + 1] = self.coeffs[self.band - b:self.band + b + 1]
        return out

    # -- evaluation -------------------------------------------------------
    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        M = self.band
        out = np.full(u.shape, self.coeffs[M])
        for k in range(1, M + 1):
            a, b = self.coeffs[M + k], self.coeffs[M - k]
            if a == 0.0 and b == 0.0:
                continue
            arg = 2.0 * np.pi * k * u
            out = out + a * np.cos(arg) + b * np.sin(arg)
        return out

    def on_grid(self, n: int = DEFAULT_GRID) -> np.ndarray:
        """Values on the uniform ``n``-point grid via inverse FFT."""
        M = self.band
        if 2 * M >= n:
            return self(torus_grid(n))
        X = np.zeros(n // 2 + 1, dtype=complex)
        X[0] = self.coeffs[M]
        k = np.arange(1, M + 1)
        X[k] = 0.5 * (self.coeffs[M + k] - 1j * self.coeffs[M - k])
        return np.fft.irfft(X * n, n)

    def on_lattice(self, n_sites: int) -> np.ndarray:
        return self.coeffs @ lattice_basis(self.modes, n_sites)

    def derivative(self) -> "TrigSeries":
        M = self.band
        out = np.zeros_like(self.coeffs)
        k = np.arange(1, M + 1)
        w = 2.0 * np.pi * k
        # d/du cos = -w sin ; d/du sin = w cos
        out[M - k] = -w * self.coeffs[M + k]
        out[M + k] = w * self.coeffs[M - k]
        return TrigSeries(out)

    def pairing(self, mode: int) -> float:
        """``int f e_mode du``."""
        return self.coeff(mode) * norm_squared(mode)

    def pairings(self, modes: Iterable[int]) -> np.ndarray:
        return np.array([self.pairing(m) for m in modes])

    def mean(self) -> float:
        return float(self.coeffs[self.band])

    def l2_squared(self) -> float:
        M = self.band
        return float(self.coeffs[M] ** 2 + 0.5 * np.sum(self.coeffs[:M] ** 2) + 0.5 * np.sum(self.coeffs[M + 1:] ** 2))

    # -- arithmetic -------------------------------------------------------
    def _aligned(self, other: "TrigSeries"):
        band = max(self.band, other.band)
        return self.with_band(band).coeffs, other.with_band(band).coeffs

    def __add__(self, other: "TrigSeries") -> "TrigSeries":
        a, b = self._aligned(other)
        return TrigSeries(a + b)

    def __sub__(self, other: "TrigSeries") -> "TrigSeries":
        a, b = self._aligned(other)
        return TrigSeries(a - b)

    def __mul__(self, scalar: float) -> "TrigSeries":
        return TrigSeries(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "TrigSeries":
        return TrigSeries(-self.coeffs)

    def to_dict(self) -> dict:
        return {"band": self.band, "coefficients": self.coeffs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "TrigSeries":
        return cls(np.array(d["coefficients"], dtype=float))


# Aliases naming the roles a TrigSeries plays.
DensityField = TrigSeries
TestFunction = TrigSeries
SignedField = TrigSeries
