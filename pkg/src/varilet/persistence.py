"""Branch persistence of the middle space by the elder rule.

Two sweeps run over the site tree in perturbed order, one ascending
(sublevel components, min sense) and one descending (superlevel, max
sense).  Each component is named by its root, the extremum where it was
born.  When components meet at a vertex the eldest root survives; each
dying root is one event at that vertex, and the events at a vertex are
kept elder-first, so event i names the i-th oldest dying branch.

The region of a dying root with event i at vertex v is v together with
the branches of all dying roots at v whose event is >= i.  Regions of one
vertex are nested by event; regions along one root's genealogy chain are
nested outright.  A global extremum never dies: its region is the whole
middle space, represented once by the root region, whose persistence is
the real value range.

comp_root(x, L) answers "which root names x's component just below
processing position L"; death positions increase along genealogy chains,
so the query is a binary-lifting climb.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoApogeeError
from .middlespace import MiddleSpace
from .unionfind import UnionFind

INF_KEY = 1 << 62


class ElderSweep:
    """Elder-rule genealogy of one sweep direction over the site tree.

    `order` lists nodes by processing position, `down_adj[v]` the tree
    neighbors of v that are processed before it, and `key[x]` the
    processing position of x.  Works for any tree with a monotone sweep,
    not just the original site tree.
    """

    def __init__(self, n: int, order, down_adj, key):
        self.n = n
        self.key = key
        birth = [-1] * n
        nxt = [-1] * n
        death_vertex = [-1] * n
        death_key = np.full(n, INF_KEY, dtype=np.int64)
        event = [0] * n
        events_at: dict[int, list[int]] = {}
        uf = UnionFind(n)
        find = uf.find
        parent = uf.parent
        for v in order:
            roots = [find(birth[d]) for d in down_adj[v]]
            if not roots:
                birth[v] = v
                continue
            if len(roots) == 1:
                birth[v] = roots[0]
                continue
            roots.sort(key=lambda r: key[r])
            surv = roots[0]
            kv = key[v]
            dying = roots[1:]
            events_at[v] = dying
            for i, r in enumerate(dying, start=1):
                death_vertex[r] = v
                death_key[r] = kv
                event[r] = i
                nxt[r] = surv
                parent[r] = surv
            birth[v] = surv
        self.birth = birth
        self.nxt = nxt
        self.death_vertex = death_vertex
        self.death_key = death_key
        self.event = event
        self.events_at = events_at
        self._up = None

    def _lifting(self):
        if self._up is None:
            n = self.n
            up0 = np.array(self.nxt, dtype=np.int64)
            levels = [up0]
            k = max(1, n.bit_length())
            for _ in range(k):
                prev = levels[-1]
                step = prev[prev]
                step[prev < 0] = -1
                levels.append(step)
            self._up = levels
        return self._up

    def comp_root(self, x: int, key_limit: int) -> int:
        """Root of x's component among nodes with key strictly below
        key_limit.  x itself must satisfy key[x] < key_limit."""
        r = self.birth[x]
        if self.death_key[r] >= key_limit:
            return r
        dk = self.death_key
        for up in reversed(self._lifting()):
            s = up[r]
            if s >= 0 and dk[s] < key_limit:
                r = int(s)
        return self.nxt[r]

    def join_key(self, x: int, y: int) -> int:
        """Smallest processing position at which x and y share a component
        (the key of the joining vertex)."""
        rx, ry = self.birth[x], self.birth[y]
        dk = self.death_key
        lvl = max(self.key[x], self.key[y])
        while rx != ry:
            a, b = dk[rx], dk[ry]
            if a <= b:
                lvl = int(a)
                rx = self.nxt[rx]
            if b <= a:
                lvl = int(b)
                ry = self.nxt[ry]
        return lvl


@dataclass
class Region:
    """One branch region.  For elementary regions `vertex` is the bounding
    vertex, `event` the elder index there, `extremum` the dying root.  The
    root region stands for the whole middle space.  Unions built during
    conflict resolution carry their flattened piece list."""

    rid: int
    sense: str                # 'max' | 'min' | 'root' | 'union'
    vertex: int
    event: int
    extremum: int
    persistence: float
    origin: str
    pieces: tuple = ()

    def __hash__(self):
        return self.rid

    def __eq__(self, other):
        return self is other


class Persistence:
    """Both elder sweeps plus the region table of the middle space."""

    def __init__(self, ms: MiddleSpace):
        self.ms = ms
        n = ms.n_sites
        rank = ms.rank
        asc = ms.order.order.tolist()
        self.min_key = rank
        self.max_key = (n - 1) - rank
        self.mins = ElderSweep(n, asc, ms.ct_down, self.min_key)
        self.maxs = ElderSweep(n, asc[::-1], ms.ct_up, self.max_key)

        real = ms.real
        lo = float(real[asc[0]])
        hi = float(real[asc[-1]])
        regions = [Region(rid=0, sense="root", vertex=-1, event=0, extremum=-1,
                          persistence=hi - lo, origin="root")]
        self.by_event: dict[tuple[str, int, int], Region] = {}
        for v in asc[::-1]:
            for i, r in enumerate(self.maxs.events_at.get(v, ()), start=1):
                reg = Region(rid=len(regions), sense="max", vertex=v, event=i,
                             extremum=r, persistence=float(real[r] - real[v]),
                             origin="max")
                regions.append(reg)
                self.by_event[("max", v, i)] = reg
        for v in asc:
            for i, r in enumerate(self.mins.events_at.get(v, ()), start=1):
                reg = Region(rid=len(regions), sense="min", vertex=v, event=i,
                             extremum=r, persistence=float(real[v] - real[r]),
                             origin="min")
                regions.append(reg)
                self.by_event[("min", v, i)] = reg
        self.regions = regions
        self.root = regions[0]

    # --- membership ---------------------------------------------------------

    def _sweep(self, sense: str) -> ElderSweep:
        return self.maxs if sense == "max" else self.mins

    def _limit(self, sense: str, vertex: int) -> int:
        key = self.max_key if sense == "max" else self.min_key
        return int(key[vertex])

    def interior_site(self, reg: Region, s: int) -> bool:
        """Is site s in the open region?  Elementary and root senses only;
        unions are answered by the lens that built them."""
        if reg.sense == "root":
            return True
        sw = self._sweep(reg.sense)
        lim = self._limit(reg.sense, reg.vertex)
        if sw.key[s] >= lim:
            return False
        r = sw.comp_root(s, lim)
        return sw.death_vertex[r] == reg.vertex and sw.event[r] >= reg.event

    def closure_site(self, reg: Region, s: int) -> bool:
        if reg.sense == "root":
            return True
        return s == reg.vertex or self.interior_site(reg, s)

    # --- lineages -----------------------------------------------------------

    def lineage(self, sense: str, site: int) -> list[Region]:
        """All elementary regions of one sense whose interior holds `site`,
        smallest first.  The root region is not included."""
        sw = self._sweep(sense)
        out = []
        r = sw.birth[site]
        while sw.death_key[r] != INF_KEY:
            v = sw.death_vertex[r]
            for j in range(sw.event[r], 0, -1):
                out.append(self.by_event[(sense, v, j)])
            r = sw.nxt[r]
        return out

    # --- per-region queries ---------------------------------------------------

    def apogees(self, reg: Region) -> list[int]:
        """Vertices of the region's closure realizing its persistence
        against points just outside: exactly the bounding vertex."""
        if reg.sense == "root":
            raise NoApogeeError("the whole middle space has no outside to realize "
                                "persistence against")
        return [reg.vertex]

    def certificate(self, reg: Region) -> dict:
        """Witness that the region's persistence is not an overstatement: a
        path from the bounding vertex to the surviving elder extremum, which
        stays strictly beyond the bounding level and outside the region."""
        if reg.sense == "root":
            raise NoApogeeError("no certificate for the root region")
        sw = self._sweep(reg.sense)
        m0 = sw.nxt[reg.extremum]
        verts, eids = self.ms.vertex_path(reg.vertex, m0)
        return {"dominator": m0, "path_vertices": verts, "path_edges": eids}

    def diagram(self) -> list[tuple[str, float, float]]:
        """(sense, extremum value, boundary value) per region, root included
        as the full real range."""
        real = self.ms.real
        out = []
        for reg in self.regions:
            if reg.sense == "root":
                mn = float(real[self.ms.order.order[0]])
                mx = float(real[self.ms.order.order[-1]])
                out.append(("root", mx, mn))
            else:
                out.append((reg.sense, float(real[reg.extremum]),
                            float(real[reg.vertex])))
        return out
