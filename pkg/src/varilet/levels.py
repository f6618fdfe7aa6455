"""Total ordering of mesh sites by (value, site index).

Ties between equal luminance values are broken by site index, which behaves
like an infinitesimal perturbation: site i carries value v + i*eps for an
eps smaller than any real gap.  Every comparison downstream goes through
ranks in this order, so tied inputs follow the same code paths as nearby
generic ones and no special plateau handling exists anywhere else.

A Probe is a level strictly between two consecutive ranks.  Its rho
component (a half-integer) drives all topological decisions; its value
component (a real luminance) drives geometry only.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class Probe(NamedTuple):
    rho: float
    value: float


class LevelOrder:
    """Ranks of all sites under the (value, site index) lexicographic order."""

    def __init__(self, values: np.ndarray):
        values = np.ascontiguousarray(values, dtype=np.float64)
        n = values.shape[0]
        self.values = values
        self.order = np.lexsort((np.arange(n), values))
        self.rank = np.empty(n, dtype=np.int64)
        self.rank[self.order] = np.arange(n)
        self._sorted_values = values[self.order]

    def __len__(self) -> int:
        return self.values.shape[0]

    def probe_above(self, site: int) -> Probe:
        """Level immediately above the given site and below the next rank."""
        return Probe(float(self.rank[site]) + 0.5, float(self.values[site]))

    def probe_below(self, site: int) -> Probe:
        """Level immediately below the given site and above the previous rank."""
        return Probe(float(self.rank[site]) - 0.5, float(self.values[site]))

    def probe_at_value(self, value: float) -> Probe:
        """Level just above every site whose value is <= the given real value."""
        o = int(np.searchsorted(self._sorted_values, value, side="right"))
        return Probe(float(o) - 0.5, float(value))

    def above(self, site: int, probe: Probe) -> bool:
        return self.rank[site] > probe.rho

    def straddles(self, lo_site: int, hi_site: int, probe: Probe) -> bool:
        return self.rank[lo_site] < probe.rho < self.rank[hi_site]
