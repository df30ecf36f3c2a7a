"""Run configuration: what to simulate, what to measure, how many replicas."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..control import ControlField
from ..lattice import Configuration
from ..sampling import (Profile, SeedSpec, lattice_values, perturbed_marginals, sample_canonical,
                        sample_equilibrium, sample_perturbed, sample_product, scaling_sequence)

SCHEMA_VERSION = 1
THREADS_ENV = "SEPDEV_THREADS"

OBSERVABLES = ("occupancy", "density", "pair_frequency", "empirical", "fluctuation",
               "martingale", "pair_integral", "replacement", "event_count", "first_event_time")
INITIAL_KINDS = ("product", "equilibrium", "canonical", "perturbed")
ENGINE_KINDS = ("symmetric", "tilted")


@dataclass
class RunConfig:
    """A complete, serialisable description of an ensemble run.

    ``initial`` examples::

        {"kind": "product", "profile": {"kind": "cosine", "mean": 0.5, "amplitude": 0.25}}
        {"kind": "equilibrium", "alpha": 0.5}
        {"kind": "canonical", "k": 32}
        {"kind": "perturbed", "profile": 0.5, "g": {"kind": "cosine", "mean": 0, "amplitude": 1}}

    ``engine`` is ``{"kind": "symmetric"}`` or
    ``{"kind": "tilted", "control": <ControlField spec>}``.
    Each entry of ``observables`` is a dict with a ``kind`` from
    :data:`OBSERVABLES` and kind-specific fields (``times``, ``modes``,
    ``mode``/``c``, ``control``, ``G``); an optional ``name`` labels it in
    the output.
    """

    n_sites: int
    horizon: float
    initial: dict = field(default_factory=lambda: {"kind": "equilibrium", "alpha": 0.5})
    engine: dict = field(default_factory=lambda: {"kind": "symmetric"})
    observables: list = field(default_factory=list)
    replicas: int = 1
    seed: int = 0
    beta: float = 0.75
    threads: int | None = None
    out: str | None = None
    keep_raw: bool = False
    schema_version: int = SCHEMA_VERSION

    # -- validation -------------------------------------------------------
    def errors(self) -> list[str]:
        errs = []
        if self.schema_version != SCHEMA_VERSION:
            errs.append(f"schema_version: expected {SCHEMA_VERSION}, got {self.schema_version}")
        if not isinstance(self.n_sites, int) or self.n_sites < 2:
            errs.append(f"n_sites: must be an integer >= 2, got {self.n_sites!r}")
        if not (isinstance(self.horizon, (int, float)) and self.horizon > 0):
            errs.append(f"horizon: must be positive, got {self.horizon!r}")
        if not 0.5 < self.beta < 1.0:
            errs.append(f"beta: must lie in (1/2, 1), got {self.beta!r}")
        if not isinstance(self.replicas, int) or self.replicas < 1:
            errs.append(f"replicas: must be an integer >= 1, got {self.replicas!r}")
        if self.threads is not None and (not isinstance(self.threads, int) or self.threads < 1):
            errs.append(f"threads: must be a positive integer or null, got {self.threads!r}")
        kind = self.initial.get("kind") if isinstance(self.initial, dict) else None
        if kind not in INITIAL_KINDS:
            errs.append(f"initial.kind: must be one of {INITIAL_KINDS}, got {kind!r}")
        ek = self.engine.get("kind") if isinstance(self.engine, dict) else None
        if ek not in ENGINE_KINDS:
            errs.append(f"engine.kind: must be one of {ENGINE_KINDS}, got {ek!r}")
        for i, ob in enumerate(self.observables):
            ok = ob.get("kind") if isinstance(ob, dict) else None
            if ok not in OBSERVABLES:
                errs.append(f"observables[{i}].kind: must be one of {OBSERVABLES}, got {ok!r}")
                continue
            for t in ob.get("times", []):
                if not 0.0 <= float(t) <= float(self.horizon):
                    errs.append(f"observables[{i}].times: {t} outside [0, horizon]")
        names = [self.observable_name(i) for i in range(len(self.observables))]
        if len(set(names)) != len(names):
            errs.append("observables: names must be unique (set 'name' to disambiguate)")
        if not errs:
            try:
                self.initial_marginals()
            except ValueError as exc:
                errs.append(f"initial: {exc}")
        return errs

    def validate(self) -> "RunConfig":
        errs = self.errors()
        if errs:
            raise ValueError("invalid run configuration:\n  " + "\n  ".join(errs))
        return self

    def observable_name(self, i: int) -> str:
        ob = self.observables[i]
        return str(ob.get("name", ob.get("kind")))

    # -- derived quantities ----------------------------------------------
    @property
    def a_n(self) -> float:
        return scaling_sequence(self.n_sites, self.beta)

    def resolved_threads(self) -> int:
        env = os.environ.get(THREADS_ENV)
        if env:
            return max(1, int(env))
        if self.threads is not None:
            return self.threads
        return os.cpu_count() or 1

    def profile(self):
        """The reference profile ``phi`` of the unperturbed law (used for centring)."""
        kind = self.initial["kind"]
        if kind == "product" or kind == "perturbed":
            return Profile.from_spec(self.initial["profile"])
        if kind == "equilibrium":
            return Profile.constant(self.initial["alpha"])
        return Profile.constant(self.initial["k"] / self.n_sites)

    def initial_marginals(self) -> np.ndarray:
        """``P(eta_0(x) = 1)`` at every site under the configured initial law."""
        kind = self.initial["kind"]
        if kind == "perturbed":
            return perturbed_marginals(self.n_sites, self.profile(),
                                       Profile.from_spec(self.initial["g"]), self.a_n)
        if kind == "canonical":
            k = self.initial["k"]
            if not 1 <= k <= self.n_sites - 1:
                raise ValueError(f"k must lie in [1, {self.n_sites - 1}], got {k}")
        p = lattice_values(self.n_sites, self.profile())
        if np.any((p <= 0) | (p >= 1)):
            raise ValueError("initial profile must lie strictly inside (0, 1)")
        return p

    def sample_initial(self, seed: SeedSpec) -> Configuration:
        kind = self.initial["kind"]
        n = self.n_sites
        if kind == "product":
            return sample_product(n, self.profile(), seed)
        if kind == "equilibrium":
            return sample_equilibrium(n, float(self.initial["alpha"]), seed)
        if kind == "canonical":
            return sample_canonical(n, int(self.initial["k"]), seed)
        return sample_perturbed(n, self.profile(), Profile.from_spec(self.initial["g"]), self.a_n, seed)

    def control(self) -> ControlField | None:
        if self.engine.get("kind") != "tilted":
            return None
        return ControlField.from_spec(self.engine.get("control"), self.horizon)

    # -- serialisation ---------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown run configuration fields: {sorted(unknown)}")
        return cls(**d)

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def replace(self, **changes) -> "RunConfig":
        d = self.to_dict()
        d.update(changes)
        return RunConfig.from_dict(d)
