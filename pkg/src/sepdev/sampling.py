"""Initial laws: product profiles, equilibrium, canonical, and perturbed.

Every draw goes through :class:`SeedSpec`, which maps ``(seed, stream)`` to
an independent Philox stream via :class:`numpy.random.SeedSequence`
spawn keys.  Initial-state draws and dynamics draws of one replica use
separate sub-streams so they never share random numbers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .basis import TrigSeries
from .lattice import Configuration

_PURPOSE = {"initial": 0, "dynamics": 1, "aux": 2}


@dataclass(frozen=True)
class SeedSpec:
    """Seed of one replica.

    ``lane`` separates independent families of replicas that share a base
    seed (the importance-sampling branch runs on lane 1).
    """

    seed: int
    stream: int = 0
    lane: int = 0

    def generator(self, purpose: str = "initial") -> np.random.Generator:
        key = (self.lane, self.stream, _PURPOSE[purpose])
        ss = np.random.SeedSequence(entropy=self.seed & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
        return np.random.Generator(np.random.Philox(ss))


def _as_seed(seed) -> SeedSpec:
    if isinstance(seed, SeedSpec):
        return seed
    return SeedSpec(int(seed))


class Profile:
    """A function on the continuum torus ``[0, 1)``.

    Build one with :meth:`constant`, :meth:`cosine`, :meth:`grid`, or wrap any
    vectorised callable.  Profiles built from named forms serialise with
    :meth:`to_spec` / :meth:`from_spec`.
    """

    def __init__(self, fn: Callable, spec: dict | None = None):
        self._fn = fn
        self.spec = spec

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(np.asarray(self._fn(u), dtype=float), u.shape).copy()

    def __repr__(self) -> str:
        return f"Profile({self.spec!r})"

    @classmethod
    def constant(cls, value: float) -> "Profile":
        value = float(value)
        return cls(lambda u: np.full(np.shape(u), value), {"kind": "constant", "value": value})

    @classmethod
    def cosine(cls, mean: float, amplitude: float, mode: int = 1, phase: float = 0.0) -> "Profile":
        """``mean + amplitude * cos(2 pi mode u + phase)``."""
        mean, amplitude, phase = float(mean), float(amplitude), float(phase)

        def fn(u):
            return mean + amplitude * np.cos(2.0 * np.pi * mode * u + phase)

        return cls(fn, {"kind": "cosine", "mean": mean, "amplitude": amplitude,
                        "mode": int(mode), "phase": phase})

    @classmethod
    def grid(cls, values) -> "Profile":
        """Periodic linear interpolation of samples at ``k / len(values)``."""
        vals = np.asarray(values, dtype=float)
        n = vals.size
        ext = np.append(vals, vals[0])
        knots = np.arange(n + 1) / n

        def fn(u):
            return np.interp(np.mod(u, 1.0), knots, ext)

        return cls(fn, {"kind": "grid", "values": vals.tolist()})

    @classmethod
    def series(cls, s: TrigSeries) -> "Profile":
        return cls(s, {"kind": "trig", **s.to_dict()})

    @classmethod
    def from_spec(cls, spec) -> "Profile":
        if isinstance(spec, (int, float)):
            return cls.constant(spec)
        kind = spec.get("kind")
        if kind == "constant":
            return cls.constant(spec["value"])
        if kind == "cosine":
            return cls.cosine(spec["mean"], spec["amplitude"], spec.get("mode", 1), spec.get("phase", 0.0))
        if kind == "grid":
            return cls.grid(spec["values"])
        if kind == "trig":
            return cls.series(TrigSeries.from_dict(spec))
        raise ValueError(f"unknown profile kind {kind!r}")

    def to_spec(self) -> dict:
        if self.spec is None:
            raise ValueError("profile built from an arbitrary callable has no serialisable form")
        return dict(self.spec)

    def to_series(self, band: int = 64, grid: int = 1024) -> TrigSeries:
        return TrigSeries.from_function(self, band, grid)


def as_profile(obj) -> Callable:
    """Accept a Profile, TrigSeries, number, spec dict, or plain callable."""
    if isinstance(obj, (Profile, TrigSeries)):
        return obj
    if isinstance(obj, (int, float)):
        return Profile.constant(obj)
    if isinstance(obj, dict):
        return Profile.from_spec(obj)
    if callable(obj):
        return obj
    raise TypeError(f"cannot interpret {obj!r} as a profile")


def lattice_values(n_sites: int, phi) -> np.ndarray:
    return np.asarray(as_profile(phi)(np.arange(n_sites) / n_sites), dtype=float)


def _check_marginals(p: np.ndarray, what: str) -> None:
    bad = np.flatnonzero(~((p > 0.0) & (p < 1.0)))
    if bad.size:
        x = int(bad[0])
        raise ValueError(f"{what} at site {x} is {float(p[x])!r}, outside (0, 1)"
                         + (f" ({bad.size} sites affected)" if bad.size > 1 else ""))


def _bernoulli(p: np.ndarray, rng: np.random.Generator) -> Configuration:
    occ = (rng.random(p.size) < p).astype(np.uint8)
    return Configuration(occ, _trusted=True)


def sample_product(n_sites: int, phi, seed) -> Configuration:
    """Independent sites with ``P(eta(x) = 1) = phi(x/N)``."""
    p = lattice_values(n_sites, phi)
    _check_marginals(p, "profile value")
    return _bernoulli(p, _as_seed(seed).generator("initial"))


def sample_product_many(n_sites: int, phi, count: int, seed, chunk: int = 4096):
    """Yield arrays of up to ``chunk`` independent product configurations.

    One random stream serves the whole batch; used where millions of
    initial configurations are needed and per-replica streams would be
    wasteful.
    """
    p = lattice_values(n_sites, phi)
    _check_marginals(p, "profile value")
    rng = _as_seed(seed).generator("aux")
    done = 0
    while done < count:
        m = min(chunk, count - done)
        yield (rng.random((m, n_sites)) < p).astype(np.uint8)
        done += m


def sample_equilibrium(n_sites: int, alpha: float, seed) -> Configuration:
    """I.i.d. Bernoulli(alpha) sites."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return _bernoulli(np.full(n_sites, float(alpha)), _as_seed(seed).generator("initial"))


def sample_canonical(n_sites: int, k_particles: int, seed) -> Configuration:
    """Uniform configuration with exactly ``k_particles`` particles."""
    if not 1 <= k_particles <= n_sites - 1:
        raise ValueError(f"k_particles must lie in [1, {n_sites - 1}], got {k_particles}")
    occ = np.zeros(n_sites, dtype=np.uint8)
    occ[:k_particles] = 1
    _as_seed(seed).generator("initial").shuffle(occ)  # Fisher-Yates
    return Configuration(occ, _trusted=True)


def perturbed_marginals(n_sites: int, phi, g, a_n: float) -> np.ndarray:
    """``phi(x/N) + (a_N/N) g(x/N)``, validated to lie in (0, 1)."""
    p = lattice_values(n_sites, phi) + (a_n / n_sites) * lattice_values(n_sites, g)
    _check_marginals(p, "perturbed marginal")
    return p


def sample_perturbed(n_sites: int, phi, g, a_n: float, seed) -> Configuration:
    """Independent sites with marginals ``phi(x/N) + (a_N/N) g(x/N)``."""
    return _bernoulli(perturbed_marginals(n_sites, phi, g, a_n), _as_seed(seed).generator("initial"))


def initial_log_likelihood_ratio(c: Configuration, phi, g, a_n: float) -> float:
    """``log dP/dP_g`` of an initial configuration.

    Product over sites of ``phi/q`` (occupied) or ``(1-phi)/(1-q)`` (empty),
    with ``q`` the perturbed marginal.
    """
    n = c.n_sites
    p = lattice_values(n, phi)
    q = perturbed_marginals(n, phi, g, a_n)
    eta = c.occupancy.astype(bool)
    return float(np.sum(np.where(eta, np.log(p) - np.log(q), np.log1p(-p) - np.log1p(-q))))


def scaling_sequence(n_sites: int, beta: float = 0.75) -> float:
    """``a_N = N^beta``; ``beta`` in (1/2, 1) keeps ``sqrt(N) << a_N << N``."""
    return float(n_sites) ** beta
