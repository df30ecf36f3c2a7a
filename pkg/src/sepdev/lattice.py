"""Sites of the discrete torus and exclusion configurations."""
from __future__ import annotations

from typing import Iterable

import numpy as np


def site(x: int, n_sites: int) -> int:
    """Reduce a site index mod ``n_sites``: ``site(N, N) == 0``."""
    return int(x) % n_sites


class Configuration:
    """Occupancy ``eta in {0,1}^N`` on the torus of ``N`` sites.

    The occupancy array is read-only; engines copy it before mutating.
    The exclusion rule is built into the representation (one byte per site,
    values 0 or 1).
    """

    __slots__ = ("_occ", "_count")

    def __init__(self, occupancy, *, _trusted: bool = False):
        occ = np.array(occupancy, dtype=np.uint8, copy=True)
        if not _trusted:
            if occ.ndim != 1 or occ.size < 2:
                raise ValueError("occupancy must be a 1-D array with at least 2 sites")
            if np.any(occ > 1):
                raise ValueError("exclusion rule violated: occupancy values must be 0 or 1")
        occ.setflags(write=False)
        self._occ = occ
        self._count = int(occ.sum())

    @property
    def occupancy(self) -> np.ndarray:
        return self._occ

    @property
    def n_sites(self) -> int:
        return self._occ.size

    @property
    def count(self) -> int:
        return self._count

    def __getitem__(self, x: int) -> int:
        return int(self._occ[site(x, self.n_sites)])

    def __len__(self) -> int:
        return self.n_sites

    def __eq__(self, other) -> bool:
        return isinstance(other, Configuration) and np.array_equal(self._occ, other._occ)

    def __hash__(self) -> int:
        return hash(self._occ.tobytes())

    def __repr__(self) -> str:
        if self.n_sites <= 64:
            return f"Configuration({self.bits()!r})"
        return f"Configuration(N={self.n_sites}, count={self.count})"

    def bits(self) -> str:
        return "".join("1" if v else "0" for v in self._occ)

    @classmethod
    def from_bits(cls, bits: str) -> "Configuration":
        return cls(np.array([int(b) for b in bits], dtype=np.uint8))


def make_configuration(n_sites: int, occupied: Iterable[int]) -> Configuration:
    """Configuration with exactly the sites in ``occupied`` filled."""
    if n_sites < 2:
        raise ValueError(f"n_sites must be >= 2, got {n_sites}")
    occ = np.zeros(n_sites, dtype=np.uint8)
    for x in occupied:
        if not 0 <= x < n_sites:
            raise ValueError(f"site index {x} out of range [0, {n_sites})")
        occ[x] = 1
    return Configuration(occ, _trusted=True)


def swap_edge(c: Configuration, x: int) -> Configuration:
    """Return ``eta^{x,x+1}``: values at ``x`` and ``x+1`` exchanged."""
    n = c.n_sites
    x = site(x, n)
    y = site(x + 1, n)
    occ = c.occupancy.copy()
    occ[x], occ[y] = occ[y], occ[x]
    return Configuration(occ, _trusted=True)


def edge_activity(occ: np.ndarray) -> np.ndarray:
    """Boolean mask of edges ``(x, x+1)`` with ``eta(x) != eta(x+1)``."""
    return occ != np.roll(occ, -1)


def active_edges(c: Configuration) -> np.ndarray:
    """Sites ``x`` whose edge to ``x+1`` joins an occupied and an empty site."""
    return np.flatnonzero(edge_activity(c.occupancy))
