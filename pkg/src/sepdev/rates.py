"""Numerical evaluation of the moderate- and large-deviation rate functionals.

Each functional is a supremum over test functions.  Restricting the test
functions to a Fourier band (and, for path functionals, to piecewise-linear
time dependence on a grid) turns every problem into a finite-dimensional
concave maximisation.  The quadratic ones are solved exactly by a linear
system; the entropy functional decouples pointwise.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.special import xlogy

from .basis import (DEFAULT_GRID, TrigSeries, basis_matrix, eigenvalue, norm_squared, torus_grid)
from .control import ControlField
from .pde import DensityPath, HeatFlow, as_density_path, as_series, path_coefficients
from .sampling import as_profile

__all__ = ["RateResult", "SusceptibilityPath", "SignedPath", "i_ini_variational",
           "i_dyn_variational", "j_ini_variational", "j_dyn_variational", "mdp_cost",
           "i_ini_closed_form", "i_dyn_closed_form", "entropy_density"]

SignedPath = DensityPath

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass
class RateResult:
    """Value of a rate functional with its optimiser and diagnostics.

    ``infinite`` tags the ``+inf`` convention explicitly; ``value`` is then
    ``math.inf``.
    """

    value: float
    optimizer: dict
    band: int
    grid: int
    diagnostics: dict = field(default_factory=dict)
    infinite: bool = False

    @classmethod
    def infinity(cls, band: int, grid: int, reason: str, **diag) -> "RateResult":
        return cls(math.inf, {}, band, grid, {"reason": reason, **diag}, infinite=True)

    def to_dict(self) -> dict:
        return {"value": None if self.infinite else self.value, "infinite": self.infinite,
                "band": self.band, "grid": self.grid,
                "optimizer": _jsonable(self.optimizer), "diagnostics": _jsonable(self.diagnostics)}

    @classmethod
    def from_dict(cls, d: dict) -> "RateResult":
        value = math.inf if d["infinite"] else float(d["value"])
        return cls(value, d["optimizer"], d["band"], d["grid"], d["diagnostics"], d["infinite"])

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path

    @classmethod
    def from_json(cls, path) -> "RateResult":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


class SusceptibilityPath:
    """``chi_s(u) = rho_s(u) (1 - rho_s(u))`` on the torus grid.

    Either tabulated at ``times`` (linear in time between rows) or computed
    exactly from a density path on demand.
    """

    def __init__(self, times=None, values=None, *, density=None, grid: int = DEFAULT_GRID):
        self.grid = grid
        self._density = density
        if density is None:
            self.times = np.atleast_1d(np.asarray(times, dtype=float))
            self.values = np.atleast_2d(np.asarray(values, dtype=float))
            if self.values.shape != (self.times.size, grid):
                raise ValueError(f"values must have shape (len(times), {grid})")
            _check_chi(self.values)
        else:
            self.times = np.asarray(getattr(density, "knots", np.empty(0)), dtype=float)
            self.values = None

    @property
    def knots(self) -> np.ndarray:
        return self.times

    @classmethod
    def constant(cls, value: float, grid: int = DEFAULT_GRID) -> "SusceptibilityPath":
        return cls([0.0], np.full((1, grid), float(value)), grid=grid)

    @classmethod
    def from_density(cls, rho, grid: int = DEFAULT_GRID) -> "SusceptibilityPath":
        return cls(density=as_density_path(rho), grid=grid)

    def at_many(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self._density is not None:
            band = min(self.grid // 2 - 1, 512)
            coeffs = path_coefficients(self._density, s, _path_band(self._density, band))
            r = np.array([TrigSeries(c).on_grid(self.grid) for c in coeffs])
            chi = r * (1.0 - r)
            _check_chi(chi)
            return chi
        if self.times.size == 1:
            return np.broadcast_to(self.values[0], (s.size, self.grid))
        k = np.clip(np.searchsorted(self.times, s, side="right") - 1, 0, self.times.size - 2)
        w = np.clip((s - self.times[k]) / (self.times[k + 1] - self.times[k]), 0.0, 1.0)
        return (1.0 - w)[:, None] * self.values[k] + w[:, None] * self.values[k + 1]


def _check_chi(chi: np.ndarray) -> None:
    if np.min(chi) < -1e-12:
        raise ValueError("indefinite quadratic form: susceptibility is negative somewhere "
                         f"(min {np.min(chi):.3g}); the density leaves [0, 1]")
    if np.max(chi) > 0.25 + 1e-12:
        raise ValueError(f"susceptibility exceeds 1/4 (max {np.max(chi):.6g})")


def _path_band(path, default: int) -> int:
    if isinstance(path, DensityPath):
        return path.band
    if isinstance(path, HeatFlow):
        return path.initial.band
    return path.at(0.0).band if hasattr(path, "at") else default


# -- initial-state functionals ------------------------------------------

def i_ini_closed_form(g, phi, grid: int = DEFAULT_GRID) -> float:
    """``(1/2) int g^2 / (phi (1 - phi)) du``."""
    u = torus_grid(grid)
    p = as_profile(phi)(u)
    gv = as_series(g).on_grid(grid) if isinstance(g, TrigSeries) else as_profile(g)(u)
    return 0.5 * float(np.mean(gv * gv / (p * (1.0 - p))))


def i_ini_variational(nu: TrigSeries, phi, band: int, grid: int = DEFAULT_GRID) -> RateResult:
    """``sup_f { nu(f) - (1/2) int phi (1 - phi) f^2 }`` over ``f`` in the band.

    ``nu`` is given by its density (a TrigSeries).  The maximiser solves
    ``A beta = b`` with the weighted Gram matrix
    ``A_nk = int phi (1 - phi) e_n e_k`` and ``b_n = nu(e_n)``.
    """
    nu = as_series(nu)
    if band < nu.highest_mode(1e-15):
        raise ValueError(f"band {band} is below the highest mode {nu.highest_mode()} of nu")
    modes = np.arange(-band, band + 1)
    u = torus_grid(grid)
    p = as_profile(phi)(u)
    w = p * (1.0 - p)
    if np.min(w) <= 0:
        raise ValueError("profile must lie strictly inside (0, 1)")
    B = basis_matrix(modes, u)
    A = (B * w) @ B.T / grid
    b = np.array([nu.pairing(int(m)) for m in modes])
    cho = scipy.linalg.cho_factor(A)
    beta = scipy.linalg.cho_solve(cho, b)
    cond = float(np.linalg.cond(A))
    value = 0.5 * float(b @ beta)
    return RateResult(value, {"modes": modes, "coefficients": beta}, band, grid,
                      {"condition_number": cond, "near_singular": cond > 1e12})


def entropy_density(p: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """``p log(p/phi) + (1-p) log((1-p)/(1-phi))`` with ``0 log 0 = 0``."""
    return xlogy(p, p) - xlogy(p, phi) + xlogy(1.0 - p, 1.0 - p) - xlogy(1.0 - p, 1.0 - phi)


def _pointwise_sup(p: np.ndarray, phi: np.ndarray, iters: int = 100) -> tuple[np.ndarray, int]:
    """``sup_f { p f - log(phi e^f + 1 - phi) }`` pointwise, by safeguarded Newton.

    The two-function problem depends on ``f1 - f2`` only, which is why one
    scalar ``f`` suffices.  At ``p`` in ``{0, 1}`` the supremum is the limit
    ``f -> -+inf`` and is returned in closed form.
    """
    lphi = np.log(phi) - np.log1p(-phi)
    interior = (p > 0) & (p < 1)
    f = np.zeros_like(p)
    it = 0
    for it in range(1, iters + 1):
        s = 1.0 / (1.0 + np.exp(-(f + lphi)))
        grad = p - s
        hess = s * (1.0 - s)
        step = np.where(interior, grad / np.maximum(hess, 1e-300), 0.0)
        step = np.clip(step, -2.0, 2.0)
        f = f + step
        if np.max(np.abs(step)) < 1e-15:
            break
    val = p * f - np.logaddexp(np.log(phi) + f, np.log1p(-phi))
    val = np.where(p <= 0, -np.log1p(-phi), val)
    val = np.where(p >= 1, -np.log(phi), val)
    return val, it


def j_ini_variational(p, phi, grid: int = DEFAULT_GRID) -> RateResult:
    """Large-deviation cost of an initial density profile ``p``.

    Value is the relative entropy ``int [p log(p/phi) + (1-p) log((1-p)/(1-phi))]``
    by trapezoid quadrature; the pointwise optimisation of the two test
    functions is run alongside as a cross-check and reported in the
    diagnostics.
    """
    u = torus_grid(grid)
    pv = p.on_grid(grid) if isinstance(p, TrigSeries) else as_profile(p)(u)
    bad = np.flatnonzero((pv < -1e-12) | (pv > 1 + 1e-12))
    if bad.size:
        raise ValueError(f"density {pv[bad[0]]!r} at u={u[bad[0]]:.6g} lies outside [0, 1]")
    pv = np.clip(pv, 0.0, 1.0)
    fv = as_profile(phi)(u)
    value = float(np.mean(entropy_density(pv, fv)))
    sup_vals, iters = _pointwise_sup(pv, fv)
    lphi = np.log(fv) - np.log1p(-fv)
    with np.errstate(divide="ignore"):
        f_opt = np.log(pv) - np.log1p(-pv) - lphi
    return RateResult(value, {"f1_minus_f2_on_grid": f_opt}, 0, grid,
                      {"pointwise_sup": float(np.mean(sup_vals)), "newton_iterations": iters})


# -- path functionals --------------------------------------------------

def _quadrature_points(a: float, b: float, breaks: np.ndarray):
    edges = np.unique(np.concatenate([[a, b], breaks[(breaks > a) & (breaks < b)]]))
    lo, hi = edges[:-1], edges[1:]
    s = (0.5 * (lo + hi))[:, None] + (0.5 * (hi - lo))[:, None] * _GL_X[None, :]
    w = (0.5 * (hi - lo))[:, None] * _GL_W[None, :]
    return s.ravel(), w.ravel()


def _pairings(W, s, modes: np.ndarray) -> np.ndarray:
    """``W_s(e_n)`` for each quadrature time and mode; shape ``(len(s), len(modes))``."""
    band = max(int(np.max(np.abs(modes))), _path_band(W, 0))
    c = path_coefficients(W, s, band)
    norms = np.array([norm_squared(int(m)) for m in modes])
    return c[:, modes + band] * norms[None, :]


def _dynamic_sup(W, chi: SusceptibilityPath, band: int, time_grid, grid: int,
                 half_resolution: bool) -> RateResult:
    tg = np.asarray(time_grid, dtype=float)
    if tg.ndim != 1 or tg.size < 2 or np.any(np.diff(tg) <= 0):
        raise ValueError("time grid must be strictly increasing with at least two points")
    modes = np.array([m for m in range(-band, band + 1) if m != 0])
    all_modes = np.concatenate([[0], modes])
    nm = modes.size
    J = tg.size
    dB = np.array([TrigSeries.single(int(m), 1.0, band).derivative().on_grid(grid) for m in modes])
    lam = eigenvalue(modes)
    breaks = np.unique(np.concatenate([np.asarray(getattr(W, "knots", []), dtype=float),
                                       np.asarray(chi.knots, dtype=float)]))
    L = np.zeros((J, nm))
    L0 = np.zeros(J)
    Q = np.zeros((J * nm, J * nm))

    end = _pairings(W, np.array([tg[0], tg[-1]]), all_modes)
    L[0] -= end[0, 1:]
    L[-1] += end[1, 1:]
    L0[0] -= end[0, 0]
    L0[-1] += end[1, 0]
    for j in range(J - 1):
        a, b = tg[j], tg[j + 1]
        h = b - a
        s, w = _quadrature_points(a, b, breaks)
        psi = np.stack([(b - s) / h, (s - a) / h])          # hats j, j+1
        dpsi = np.array([-1.0 / h, 1.0 / h])
        P = _pairings(W, s, all_modes)                      # (S, 1 + nm)
        for q, jj in enumerate((j, j + 1)):
            L[jj] += -dpsi[q] * (w @ P[:, 1:]) + lam * ((w * psi[q]) @ P[:, 1:])
            L0[jj] -= dpsi[q] * float(w @ P[:, 0])
        X = chi.at_many(s)                                   # (S, grid)
        for qa, ja in enumerate((j, j + 1)):
            for qb, jb in enumerate((j, j + 1)):
                if jb < ja:
                    continue
                chi_w = (w * psi[qa] * psi[qb]) @ X
                G = (dB * chi_w) @ dB.T / grid
                Q[ja * nm:(ja + 1) * nm, jb * nm:(jb + 1) * nm] += G
                if ja != jb:
                    Q[jb * nm:(jb + 1) * nm, ja * nm:(ja + 1) * nm] += G.T
    Lv = L.ravel()
    scale = max(1.0, float(np.max(np.abs(Lv))), float(np.max(np.abs(L0))))
    diag = {"time_points": J, "mode_zero_residual": float(np.max(np.abs(L0)))}
    if diag["mode_zero_residual"] > 1e-9 * scale:
        return RateResult.infinity(band, grid, "linear term does not vanish on constants "
                                   "(the path changes total mass)", **diag)
    try:
        cho = scipy.linalg.cho_factor(Q)
        beta = scipy.linalg.cho_solve(cho, Lv)
        diag["solver"] = "cholesky"
    except np.linalg.LinAlgError:
        ev, U = np.linalg.eigh(Q)
        if ev.min() < -1e-10 * max(ev.max(), 1.0):
            raise ValueError("indefinite quadratic form: susceptibility must be non-negative")
        tol = 1e-12 * max(ev.max(), 1.0)
        proj = U.T @ Lv
        null = ev <= tol
        diag["solver"] = "eigh"
        if np.any(null) and np.max(np.abs(proj[null])) > 1e-9 * scale:
            return RateResult.infinity(band, grid, "linear term charges a direction with no "
                                       "quadratic penalty", **diag)
        beta = U[:, ~null] @ (proj[~null] / ev[~null])
    value = 0.25 * float(Lv @ beta)
    coeffs = 0.5 * beta.reshape(J, nm)
    if half_resolution and J >= 3:
        coarse = tg[::2] if (J - 1) % 2 == 0 else np.append(tg[::2], tg[-1])
        diag["half_resolution_value"] = _dynamic_sup(W, chi, band, coarse, grid, False).value
    return RateResult(value, {"modes": modes, "time_grid": tg, "coefficients": coeffs}, band, grid,
                      diag)


def i_dyn_variational(W, chi: SusceptibilityPath, band: int, time_grid,
                      grid: int = DEFAULT_GRID) -> RateResult:
    """Moderate-deviation dynamic cost of the signed path ``W``.

    ``sup_F { W_T(F_T) - W_0(F_0) - int W_s((d_s + d_uu) F_s) ds - int int chi (d_u F)^2 }``
    over ``F_s = sum_{|n| <= band} sum_j beta_{nj} psi_j(s) e_n`` with hat
    functions ``psi_j`` on ``time_grid``.  The objective is ``L.beta - beta.Q.beta``
    so the supremum is ``L.Q^{-1}.L / 4``.  Time integrals use 8-point
    Gauss-Legendre on every interval between grid points and the knots of
    ``W`` and ``chi``.  ``diagnostics["half_resolution_value"]`` repeats the
    computation on every other grid point.

    A path whose total mass moves makes the constant direction unbounded;
    that returns a tagged ``+inf``.
    """
    return _dynamic_sup(W, chi, band, time_grid, grid, True)


def j_dyn_variational(W, band: int, time_grid, grid: int = DEFAULT_GRID) -> RateResult:
    """Large-deviation dynamic cost of the density path ``W``.

    Same quadratic problem as :func:`i_dyn_variational` with
    ``chi = W (1 - W)`` built from the path itself.  A density leaving
    ``[0, 1]`` anywhere on the quadrature grid gives the tagged ``+inf``.
    """
    W = as_density_path(W)
    tg = np.asarray(time_grid, dtype=float)
    check_t = np.unique(np.concatenate([tg, np.asarray(getattr(W, "knots", []), dtype=float)]))
    check_t = check_t[(check_t >= tg[0]) & (check_t <= tg[-1])]
    coeffs = path_coefficients(W, check_t, _path_band(W, 0))
    vals = np.array([TrigSeries(c).on_grid(grid) for c in coeffs])
    lo, hi = float(vals.min()), float(vals.max())
    if lo < -1e-12 or hi > 1 + 1e-12:
        return RateResult.infinity(band, grid, "density leaves [0, 1]", min=lo, max=hi)
    return _dynamic_sup(W, SusceptibilityPath.from_density(W, grid), band, tg, grid, True)


def i_dyn_closed_form(F: ControlField, chi: SusceptibilityPath, horizon: float,
                      grid: int = DEFAULT_GRID) -> float:
    """``int_0^T int chi_s (d_u F_s)^2 du ds``."""
    breaks = np.unique(np.concatenate([F.knots, np.asarray(chi.knots, dtype=float),
                                       np.linspace(0.0, horizon, 65)]))
    s, w = _quadrature_points(0.0, horizon, breaks)
    X = chi.at_many(s)
    dF = np.array([F.at(t).derivative().on_grid(grid) for t in s])
    return float(w @ np.mean(X * dF * dF, axis=1))


def mdp_cost(W, nu0, phi, chi: SusceptibilityPath, band: int, time_grid,
             grid: int = DEFAULT_GRID) -> float:
    """``I_ini(W_0) + I_dyn(W)``."""
    nu0 = as_series(nu0)
    W = as_density_path(W)
    w0 = W.at(float(np.asarray(time_grid)[0]))
    b = max(w0.band, nu0.band)
    if np.max(np.abs(w0.with_band(b).coeffs - nu0.with_band(b).coeffs), initial=0.0) > 1e-8:
        raise ValueError("W_0 does not match nu0")
    ini = i_ini_variational(nu0, phi, max(band, nu0.highest_mode(1e-15)), grid)
    dyn = i_dyn_variational(W, chi, band, time_grid, grid)
    return ini.value + dyn.value
