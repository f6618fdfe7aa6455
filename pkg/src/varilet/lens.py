"""Conflict resolution between regions of opposite sense.

Regions of one sense are laminar by construction, but a sublevel region
and a superlevel region can overlap without either containing the other.
Such a pair is a conflict.  Two closures intersect exactly when they share
part of a contracted edge or touch at a common bounding vertex, so
conflicts are found by scanning edges (coverage intervals of the two
lineages) and vertices (both senses dying at one site).

Conflicts are resolved cheapest-first by a configurable policy list:

* union    - applicable only when the two boundary values are equal as
             reals; the merged region replaces both.  Invalid if nothing
             of the boundary survives (the union would be everything).
* choice   - keep the stronger region (persistence, then origin, then
             older id), drop the other.
* omit     - drop both.

The surviving family is laminar, so it forms a forest under inclusion.
Ownership of the middle space is then tabulated per contracted edge:
each edge is cut at the bounding levels of the regions covering it, and
every span between cuts belongs to the deepest surviving region covering
it.  Span lengths are real value differences, so the own lengths of all
regions partition the total traversed variation.

Facets are connected components of a region's interior: one per branch
for an elementary region, glued across swallowed cuts and interior
vertices for unions.  Each facet's boundary is a set of germs for the
tracer, all carrying the bounding level of the region that owns them.
"""

from __future__ import annotations

import bisect
import heapq
from dataclasses import dataclass

import numpy as np

from .errors import LensInvalidError
from .persistence import INF_KEY, Persistence, Region
from .tracing import Germ
from .unionfind import UnionFind

_ORIGIN_RANKING = {"max": 2, "union": 1, "min": 0}


@dataclass
class Facet:
    """One connected component of a region's interior."""

    key: tuple
    region: Region
    germs: list
    has_frame: bool = False


class Lens:
    """Resolution of all cross-sense conflicts plus the resulting
    ownership structure of the middle space."""

    def __init__(self, pers: Persistence, policies=("union", "choice", "omit")):
        self.pers = pers
        self.ms = pers.ms
        self.policies = tuple(policies)
        for pol in self.policies:
            if pol not in ("union", "choice", "omit"):
                raise ValueError(f"unknown policy {pol!r}")
        self.rank = self.ms.rank
        self.real = self.ms.real
        self._order = self.ms.order.order

        self.regions: list[Region] = list(pers.regions)
        self._alive = [True] * len(self.regions)
        self._replaced: dict[int, int] = {}
        self._bv = [0.0] * len(self.regions)
        for reg in self.regions:
            if reg.sense != "root":
                self._bv[reg.rid] = float(self.real[reg.vertex])
        self._lin_cache: dict[tuple[str, int], list[Region]] = {}
        self._cov_cache: dict[int, dict[int, tuple[int, int]]] = {}
        self.resolution_log: list[dict] = []

        self._resolve_conflicts()
        self._build_forest()
        self._build_segments()
        self._facets = None

    # --- basic helpers --------------------------------------------------------

    def real_at_rank(self, r: int) -> float:
        return float(self.real[self._order[r]])

    def _lineage(self, sense: str, site: int) -> list[Region]:
        key = (sense, site)
        got = self._lin_cache.get(key)
        if got is None:
            got = self.pers.lineage(sense, site)
            self._lin_cache[key] = got
        return got

    def boundary_value(self, reg: Region) -> float:
        return self._bv[reg.rid]

    def alive(self, reg: Region) -> bool:
        return self._alive[reg.rid]

    def alive_regions(self) -> list[Region]:
        return [r for r in self.regions if self._alive[r.rid]]

    def final_owner(self, reg: Region) -> Region | None:
        """Chase a region through union absorption; None if dropped."""
        rid = reg.rid
        while not self._alive[rid]:
            nxt = self._replaced.get(rid)
            if nxt is None:
                return None
            rid = nxt
        return self.regions[rid]

    def _pieces(self, reg: Region) -> tuple:
        return reg.pieces if reg.sense == "union" else (reg,)

    # --- membership, union aware ----------------------------------------------

    def interior_site(self, reg: Region, s: int) -> bool:
        if reg.sense != "union":
            return self.pers.interior_site(reg, s)
        for p in reg.pieces:
            if self.pers.interior_site(p, s):
                return True
        if any(p.vertex == s for p in reg.pieces):
            return self._vertex_interior(s, reg.pieces)
        return False

    def closure_site(self, reg: Region, s: int) -> bool:
        if reg.sense != "union":
            return self.pers.closure_site(reg, s)
        return any(self.pers.closure_site(p, s) for p in reg.pieces)

    def _stub_covered(self, v: int, eid: int, down: bool, pieces) -> bool:
        """Is the part of this edge right next to v inside the union?"""
        ms = self.ms
        pers = self.pers
        e = ms.edges[eid]
        s0 = (e.chain[-1] if e.chain else e.lo) if down else \
            (e.chain[0] if e.chain else e.hi)
        for p in pieces:
            if p.vertex == v:
                if down and p.sense == "min":
                    sw = pers.mins
                    r = sw.comp_root(s0, self.rank[v])
                    if sw.death_vertex[r] == v and sw.event[r] >= p.event:
                        return True
                elif not down and p.sense == "max":
                    sw = pers.maxs
                    r = sw.comp_root(s0, pers.max_key[v])
                    if sw.death_vertex[r] == v and sw.event[r] >= p.event:
                        return True
            elif pers.interior_site(p, v):
                return True
        return False

    def _vertex_interior(self, v: int, pieces) -> bool:
        """A bounding vertex is interior to a union when every edge stub at
        it is covered by some piece."""
        ms = self.ms
        for eid in ms.vertex_down_edges.get(v, ()):
            if not self._stub_covered(v, eid, True, pieces):
                return False
        for eid in ms.vertex_up_edges.get(v, ()):
            if not self._stub_covered(v, eid, False, pieces):
                return False
        return True

    # --- containment ------------------------------------------------------------

    def _elem_subset(self, x: Region, y: Region) -> bool:
        """x and y elementary: the whole of x lies in y exactly when x's
        own extremum is interior to y."""
        return self.pers.interior_site(y, x.extremum)

    def region_subset(self, x: Region, y: Region) -> bool:
        if x is y:
            return True
        if y.sense == "root":
            return True
        if x.sense == "root":
            return False
        if x.sense != "union" and y.sense != "union":
            return self._elem_subset(x, y)
        if x.sense == "union":
            return all(self.region_subset(p, y) for p in x.pieces)
        # x elementary, y union: quick piece test, then the skeleton walk
        if any(self._elem_subset(x, p) for p in y.pieces):
            return True
        if not self.interior_site(y, x.extremum):
            return False
        return self._covered_by_union(x, y)

    def _covered_by_union(self, x: Region, y: Region) -> bool:
        """Exhaustive check that elementary x lies inside union y: every
        edge interval and skeleton vertex of x must be covered."""
        ms = self.ms
        for eid, (_, cut) in self._coverage(x).items():
            lo_r = int(self.rank[ms.edge_lo[eid]])
            hi_r = int(self.rank[ms.edge_hi[eid]])
            if cut < 0:
                need = (lo_r, hi_r)
            elif x.sense == "min":
                need = (lo_r, cut)
            else:
                need = (cut, hi_r)
            if not any(a <= need[0] and need[1] <= b
                       for a, b in self._union_intervals(y, eid)):
                return False
            for v in (ms.edge_lo[eid], ms.edge_hi[eid]):
                v = int(v)
                if v != x.vertex and ms.is_vertex[v] \
                        and self.pers.closure_site(x, v) \
                        and not self.closure_site(y, v):
                    return False
        return True

    def _union_intervals(self, u: Region, eid: int) -> list[tuple[int, int]]:
        """Closed rank intervals of a union's closure on one edge, merged
        where pieces meet or overlap."""
        ms = self.ms
        lo_r = int(self.rank[ms.edge_lo[eid]])
        hi_r = int(self.rank[ms.edge_hi[eid]])
        spans = []
        for p in u.pieces:
            got = self._coverage(p).get(eid)
            if got is None:
                continue
            _, cut = got
            if cut < 0:
                spans.append((lo_r, hi_r))
            elif p.sense == "min":
                spans.append((lo_r, cut))
            else:
                spans.append((cut, hi_r))
        if not spans:
            return []
        spans.sort()
        out = [spans[0]]
        for a, b in spans[1:]:
            if a <= out[-1][1]:
                out[-1] = (out[-1][0], max(out[-1][1], b))
            else:
                out.append((a, b))
        return out

    # --- branch coverage (elementary regions) ------------------------------------

    def branch_roots(self, reg: Region) -> list[int]:
        sw = self.pers._sweep(reg.sense)
        return list(sw.events_at[reg.vertex][reg.event - 1:])

    def _branch_root_of_edge(self, sense: str, v: int, eid: int) -> int:
        ms = self.ms
        e = ms.edges[eid]
        pers = self.pers
        if sense == "min":
            s0 = e.chain[-1] if e.chain else e.lo
            return pers.mins.comp_root(s0, self.rank[v])
        s0 = e.chain[0] if e.chain else e.hi
        return pers.maxs.comp_root(s0, pers.max_key[v])

    def _coverage(self, reg: Region) -> dict[int, tuple[int, int]]:
        """eid -> (branch root, cut rank) for an elementary region; cut is
        -1 for fully covered edges.  Min sense covers [edge lo, cut], max
        sense [cut, edge hi], the cut being the closure's reach."""
        got = self._cov_cache.get(reg.rid)
        if got is not None:
            return got
        ms = self.ms
        v = reg.vertex
        lim = int(self.rank[v])
        wanted = set(self.branch_roots(reg))
        cov: dict[int, tuple[int, int]] = {}
        if reg.sense == "min":
            into, away = ms.vertex_down_edges, ms.vertex_up_edges
        else:
            into, away = ms.vertex_up_edges, ms.vertex_down_edges
        for eid in into.get(v, ()):
            r = self._branch_root_of_edge(reg.sense, v, eid)
            if r not in wanted:
                continue
            cov[eid] = (r, lim)
            start = int(ms.edge_lo[eid] if reg.sense == "min" else ms.edge_hi[eid])
            stack = [start]
            seen = {v, start}
            while stack:
                u = stack.pop()
                for eid2 in into.get(u, ()):
                    far = int(ms.edge_lo[eid2] if reg.sense == "min"
                              else ms.edge_hi[eid2])
                    cov[eid2] = (r, -1)
                    if far not in seen:
                        seen.add(far)
                        stack.append(far)
                for eid2 in away.get(u, ()):
                    if eid2 == eid:
                        continue
                    far = int(ms.edge_hi[eid2] if reg.sense == "min"
                              else ms.edge_lo[eid2])
                    far_in = (self.rank[far] < lim) if reg.sense == "min" \
                        else (self.rank[far] > lim)
                    if far_in:
                        cov[eid2] = (r, -1)
                        if far not in seen:
                            seen.add(far)
                            stack.append(far)
                    else:
                        cov[eid2] = (r, lim)
        self._cov_cache[reg.rid] = cov
        return cov

    def _edge_cut(self, reg: Region, eid: int, far_rank: int) -> int:
        lim = int(self.rank[reg.vertex])
        return min(lim, far_rank) if reg.sense == "min" else max(lim, far_rank)

    def _region_intervals(self, reg: Region, eid: int) -> list[tuple[int, int]]:
        """Closed rank intervals of any region's closure on one edge."""
        if reg.sense == "root":
            ms = self.ms
            return [(int(self.rank[ms.edge_lo[eid]]),
                     int(self.rank[ms.edge_hi[eid]]))]
        if reg.sense == "union":
            return self._union_intervals(reg, eid)
        got = self._coverage(reg).get(eid)
        if got is None:
            return []
        ms = self.ms
        lo_r = int(self.rank[ms.edge_lo[eid]])
        hi_r = int(self.rank[ms.edge_hi[eid]])
        _, cut = got
        if cut < 0:
            return [(lo_r, hi_r)]
        return [(lo_r, cut)] if reg.sense == "min" else [(cut, hi_r)]

    def _owner_covers(self, o: Region, eid: int, lo_r: int, hi_r: int) -> bool:
        if o.sense == "root":
            return True
        return any(a <= lo_r and hi_r <= b
                   for a, b in self._region_intervals(o, eid))

    # --- conflict detection --------------------------------------------------------

    def _initial_conflicts(self) -> set[tuple[int, int]]:
        ms = self.ms
        pers = self.pers
        pairs: set[tuple[int, int]] = set()
        for v in ms.vertices:
            down = pers.mins.events_at.get(v)
            up = pers.maxs.events_at.get(v)
            if not down or not up:
                continue
            for i in range(1, len(down) + 1):
                a = pers.by_event[("min", v, i)]
                for j in range(1, len(up) + 1):
                    pairs.add((a.rid, pers.by_event[("max", v, j)].rid))
        for e in ms.edges:
            sa = self._lineage("min", e.lo)
            if not sa:
                continue
            sb = self._lineage("max", e.hi)
            if not sb:
                continue
            ra, rb = int(self.rank[e.lo]), int(self.rank[e.hi])
            cuts_a = [self._edge_cut(a, e.id, rb) for a in sa]
            for b in sb:
                cut_b = self._edge_cut(b, e.id, ra)
                start = bisect.bisect_right(cuts_a, cut_b)
                lo, hi = 0, len(sa)
                while lo < hi:  # first a not contained in b
                    mid = (lo + hi) // 2
                    if self.pers.interior_site(b, sa[mid].extremum):
                        lo = mid + 1
                    else:
                        hi = mid
                start = max(start, lo)
                lo, hi = start, len(sa)
                while lo < hi:  # first a containing b
                    mid = (lo + hi) // 2
                    if self.pers.interior_site(sa[mid], b.extremum):
                        hi = mid
                    else:
                        lo = mid + 1
                for a in sa[start:lo]:
                    pairs.add((a.rid, b.rid))
        return pairs

    def _closures_intersect(self, x: Region, y: Region) -> bool:
        for p in self._pieces(x):
            for q in self._pieces(y):
                if p.vertex == q.vertex:
                    return True
                if p.sense == q.sense:
                    if self.pers.interior_site(p, q.extremum) \
                            or self.pers.interior_site(q, p.extremum):
                        return True
                else:
                    if self.pers.interior_site(p, q.vertex) \
                            or self.pers.interior_site(q, p.vertex):
                        return True
        return False

    def _conflicts(self, x: Region, y: Region) -> bool:
        if not self._closures_intersect(x, y):
            return False
        return not self.region_subset(x, y) and not self.region_subset(y, x)

    def _containers(self, reg: Region) -> list[Region]:
        """Alive regions strictly containing reg (root excluded)."""
        if reg.sense == "root":
            return []
        if reg.sense == "union":
            base = self._containers(reg.pieces[0])
            return [y for y in base
                    if y is not reg and self.region_subset(reg, y)]
        out = []
        m = reg.extremum
        chain = self._lineage(reg.sense, m)
        past = False
        for y in chain:
            if past and self._alive[y.rid]:
                out.append(y)
            if y is reg:
                past = True
        other = "max" if reg.sense == "min" else "min"
        for y in self._lineage(other, m):
            if self._alive[y.rid] and y is not reg:
                out.append(y)
        for y in self.regions:
            if y.sense == "union" and self._alive[y.rid] and y is not reg:
                if self.interior_site(y, m) and self.region_subset(reg, y):
                    out.append(y)
        return out

    # --- resolution ------------------------------------------------------------------

    def _pair_key(self, a: Region, b: Region):
        return (a.persistence + b.persistence, min(a.rid, b.rid),
                max(a.rid, b.rid))

    def _resolve_conflicts(self):
        partners: dict[int, set[int]] = {}
        heap = []
        for ra, rb in self._initial_conflicts():
            a, b = self.regions[ra], self.regions[rb]
            heap.append((*self._pair_key(a, b), ra, rb))
            partners.setdefault(ra, set()).add(rb)
            partners.setdefault(rb, set()).add(ra)
        heapq.heapify(heap)
        while heap:
            _, _, _, ra, rb = heapq.heappop(heap)
            if not self._alive[ra] or not self._alive[rb]:
                continue
            a, b = self.regions[ra], self.regions[rb]
            partners.get(ra, set()).discard(rb)
            partners.get(rb, set()).discard(ra)
            if not self._resolve_pair(a, b, partners, heap):
                raise LensInvalidError(
                    f"conflict between regions {ra} and {rb} not resolvable "
                    f"by policies {list(self.policies)}")

    def _resolve_pair(self, a, b, partners, heap) -> bool:
        for pol in self.policies:
            if pol == "union":
                u = self._try_union(a, b)
                if u is None:
                    continue
                cands = set(partners.get(a.rid, ())) | set(partners.get(b.rid, ()))
                for c in self._containers(a) + self._containers(b):
                    cands.add(c.rid)
                self._kill(a, replaced=u.rid)
                self._kill(b, replaced=u.rid)
                for rc in sorted(cands):
                    if not self._alive[rc] or rc == u.rid:
                        continue
                    c = self.regions[rc]
                    if self._conflicts(u, c):
                        heapq.heappush(heap, (*self._pair_key(u, c), u.rid, rc))
                        partners.setdefault(u.rid, set()).add(rc)
                        partners.setdefault(rc, set()).add(u.rid)
                self.resolution_log.append(
                    {"policy": "union", "pair": [a.rid, b.rid], "kept": u.rid})
                return True
            if pol == "choice":
                ka = (a.persistence, _ORIGIN_RANKING[a.origin], -a.rid)
                kb = (b.persistence, _ORIGIN_RANKING[b.origin], -b.rid)
                loser, winner = (b, a) if ka >= kb else (a, b)
                self._kill(loser, replaced=None)
                self.resolution_log.append(
                    {"policy": "choice", "pair": [a.rid, b.rid],
                     "kept": winner.rid})
                return True
            if pol == "omit":
                self._kill(a, replaced=None)
                self._kill(b, replaced=None)
                self.resolution_log.append(
                    {"policy": "omit", "pair": [a.rid, b.rid], "kept": None})
                return True
        return False

    def _kill(self, reg: Region, replaced: int | None):
        self._alive[reg.rid] = False
        if replaced is not None:
            self._replaced[reg.rid] = replaced

    def _try_union(self, a: Region, b: Region) -> Region | None:
        if self._bv[a.rid] != self._bv[b.rid]:
            return None
        pieces = tuple(sorted(set(self._pieces(a)) | set(self._pieces(b)),
                              key=lambda p: p.rid))
        if all(self._vertex_interior(v, pieces)
               for v in sorted({p.vertex for p in pieces})):
            return None
        best = max(pieces, key=lambda p: (p.persistence, -p.rid))
        u = Region(rid=len(self.regions), sense="union", vertex=-1, event=0,
                   extremum=best.extremum,
                   persistence=max(a.persistence, b.persistence),
                   origin="union", pieces=pieces)
        self.regions.append(u)
        self._alive.append(True)
        self._bv.append(self._bv[a.rid])
        return u

    # --- parent forest -------------------------------------------------------------

    def _build_forest(self):
        self.root = self.pers.root
        self.parent: dict[int, Region | None] = {self.root.rid: None}
        alive = self.alive_regions()
        for reg in alive:
            if reg is self.root:
                continue
            cands = [c for c in self._containers(reg) if c.sense != "root"]
            if not cands:
                self.parent[reg.rid] = self.root
                continue
            best = cands[0]
            for c in cands[1:]:
                if self.region_subset(c, best):
                    best = c
            self.parent[reg.rid] = best
        self.children: dict[int, list[Region]] = {r.rid: [] for r in alive}
        for reg in alive:
            p = self.parent[reg.rid]
            if p is not None:
                self.children[p.rid].append(reg)
        for kids in self.children.values():
            kids.sort(key=lambda r: r.rid)
        self.depth: dict[int, int] = {}
        stack = [(self.root, 0)]
        while stack:
            reg, d = stack.pop()
            self.depth[reg.rid] = d
            for ch in self.children[reg.rid]:
                stack.append((ch, d + 1))

    def owner_chain(self, reg: Region) -> list[Region]:
        out = [reg]
        while self.parent[out[-1].rid] is not None:
            out.append(self.parent[out[-1].rid])
        return out

    # --- segment table ----------------------------------------------------------------

    def _build_segments(self):
        """Cut every contracted edge at the bounding levels of its alive
        coverers and assign each span to the deepest one."""
        ms = self.ms
        self.edge_bounds: dict[int, list[int]] = {}
        self.edge_owners: dict[int, list[Region]] = {}
        self.own_segments: dict[int, list[tuple[int, int, int, float]]] = \
            {r.rid: [] for r in self.alive_regions()}
        for e in ms.edges:
            ra, rb = int(self.rank[e.lo]), int(self.rank[e.hi])
            mins_cov, maxs_cov = [], []
            plain = True
            for a in self._lineage("min", e.lo):
                o = self.final_owner(a)
                if o is None:
                    continue
                if o.sense == "union":
                    plain = False
                mins_cov.append((self._edge_cut(a, e.id, rb), o))
            for b in self._lineage("max", e.hi):
                o = self.final_owner(b)
                if o is None:
                    continue
                if o.sense == "union":
                    plain = False
                maxs_cov.append((self._edge_cut(b, e.id, ra), o))
            bounds = {ra, rb}
            for cut, _ in mins_cov:
                if ra < cut < rb:
                    bounds.add(cut)
            for cut, _ in maxs_cov:
                if ra < cut < rb:
                    bounds.add(cut)
            if not plain:
                for _, o in mins_cov + maxs_cov:
                    if o.sense == "union":
                        for x, y in self._union_intervals(o, e.id):
                            if ra < x < rb:
                                bounds.add(x)
                            if ra < y < rb:
                                bounds.add(y)
            bounds = sorted(bounds)
            owners = []
            min_cuts = [c for c, _ in mins_cov]
            for lo_r, hi_r in zip(bounds, bounds[1:]):
                if plain:
                    i = bisect.bisect_left(min_cuts, hi_r)
                    cand = mins_cov[i][1] if i < len(mins_cov) else None
                    cand2 = next((o for cut, o in maxs_cov if cut <= lo_r),
                                 None)
                else:
                    cand = next((o for _, o in mins_cov
                                 if self._owner_covers(o, e.id, lo_r, hi_r)),
                                None)
                    cand2 = next((o for _, o in maxs_cov
                                  if self._owner_covers(o, e.id, lo_r, hi_r)),
                                 None)
                owner = self._deeper(cand, cand2)
                owners.append(owner if owner is not None else self.root)
            self.edge_bounds[e.id] = bounds
            self.edge_owners[e.id] = owners
            for (lo_r, hi_r), o in zip(zip(bounds, bounds[1:]), owners):
                seg_len = self.real_at_rank(hi_r) - self.real_at_rank(lo_r)
                self.own_segments[o.rid].append((e.id, lo_r, hi_r, seg_len))

    def _deeper(self, a: Region | None, b: Region | None) -> Region | None:
        if a is None:
            return b
        if b is None or a is b:
            return a
        return a if self.region_subset(a, b) else b

    # --- site ownership ------------------------------------------------------------------

    def owner_of_site(self, s: int) -> Region:
        """Deepest alive region whose interior holds site s."""
        ms = self.ms
        if not ms.is_vertex[s]:
            eid = int(ms.site_edge[s])
            bounds = self.edge_bounds[eid]
            i = bisect.bisect_right(bounds, int(self.rank[s])) - 1
            i = min(i, len(self.edge_owners[eid]) - 1)
            return self.edge_owners[eid][i]
        down = ms.vertex_down_edges.get(s)
        if down:
            reg = self.edge_owners[down[0]][-1]
        else:
            reg = self.edge_owners[ms.vertex_up_edges[s][0]][0]
        while reg is not None and not self.interior_site(reg, s):
            reg = self.parent[reg.rid]
        return reg if reg is not None else self.root

    # --- facets -------------------------------------------------------------------------

    def _region_germs(self, reg: Region) -> dict[tuple, list[Germ]]:
        """Proto-facets of an elementary region: germs grouped by branch."""
        v = reg.vertex
        val = float(self.real[v])
        below = reg.sense == "min"
        rho = self.rank[v] - 0.5 if below else self.rank[v] + 0.5
        out: dict[tuple, list[Germ]] = {}
        for eid, (r, cut) in self._coverage(reg).items():
            bucket = out.setdefault((reg.rid, int(r)), [])
            if cut >= 0:
                bucket.append(Germ(eid, float(rho), val, below))
        return out

    def _branch_of_site(self, p: Region, s: int) -> int:
        pers = self.pers
        if p.sense == "min":
            return int(pers.mins.comp_root(s, self.rank[p.vertex]))
        return int(pers.maxs.comp_root(s, pers.max_key[p.vertex]))

    def _union_facets(self, reg: Region) -> list[tuple[tuple, list[Germ]]]:
        ms = self.ms
        pers = self.pers
        proto: dict[tuple, list[Germ]] = {}
        by_piece = {p.rid: p for p in reg.pieces}
        for p in reg.pieces:
            for key, germs in self._region_germs(p).items():
                proto.setdefault(key, []).extend(germs)
        keys = sorted(proto.keys())
        idx = {k: i for i, k in enumerate(keys)}
        uf = UnionFind(len(keys))
        edge_users: dict[int, list[tuple]] = {}
        for p in reg.pieces:
            for eid, (r, cut) in self._coverage(p).items():
                edge_users.setdefault(eid, []).append((p, int(r), cut))
        for eid, users in edge_users.items():
            if len(users) < 2:
                continue
            lo_r = int(self.rank[ms.edge_lo[eid]])
            hi_r = int(self.rank[ms.edge_hi[eid]])
            ivs = []
            for p, r, cut in users:
                if cut < 0:
                    ivs.append((lo_r, hi_r))
                elif p.sense == "min":
                    ivs.append((lo_r, cut))
                else:
                    ivs.append((cut, hi_r))
            for i in range(len(users)):
                for j in range(i + 1, len(users)):
                    if ivs[i][0] <= ivs[j][1] and ivs[j][0] <= ivs[i][1]:
                        uf.union(idx[(users[i][0].rid, users[i][1])],
                                 idx[(users[j][0].rid, users[j][1])])
        for v in sorted({p.vertex for p in reg.pieces}):
            at_v = [p for p in reg.pieces if p.vertex == v]
            if self._vertex_interior(v, reg.pieces):
                glue = []
                for p in at_v:
                    glue.extend((p.rid, r) for r in self.branch_roots(p))
                for p in reg.pieces:
                    if p.vertex != v and pers.interior_site(p, v):
                        glue.append((p.rid, self._branch_of_site(p, v)))
                for k in glue[1:]:
                    uf.union(idx[glue[0]], idx[k])
            else:
                self._glue_sectors(v, at_v, idx, uf)
        classes: dict[int, list[Germ]] = {}
        for key, germs in proto.items():
            c = uf.find(idx[key])
            bucket = classes.setdefault(c, [])
            p = by_piece[key[0]]
            for g in germs:
                if not self._germ_swallowed(g, p, reg):
                    bucket.append(g)
        out = []
        for c in sorted({uf.find(i) for i in range(len(keys))}):
            members = [k for k in keys if uf.find(idx[k]) == c]
            seen = set()
            uniq = []
            for g in classes.get(c, ()):
                if g not in seen:
                    seen.add(g)
                    uniq.append(g)
            out.append((min(members), members, uniq))
        out.sort(key=lambda t: t[0])
        return out

    def _glue_sectors(self, v: int, at_v: list[Region], idx, uf):
        """At a pinched vertex, boundary arcs around the domain point join
        any covered low sector to each adjacent covered high sector, so the
        corresponding branch facets are one component."""
        mins_at = [p for p in at_v if p.sense == "min"]
        maxs_at = [p for p in at_v if p.sense == "max"]
        if not mins_at or not maxs_at:
            return
        ms = self.ms
        pers = self.pers
        mesh = ms.mesh
        nbrs = mesh.neighbors(v)
        pos = mesh.site_positions()
        px, py = mesh.site_position(v)
        ang = np.arctan2(pos[nbrs, 1] - py, pos[nbrs, 0] - px)
        ring = [int(nbrs[i]) for i in np.argsort(ang, kind="stable")]
        lv = int(self.rank[v])
        k = len(ring)
        for i in range(k):
            u1, u2 = ring[i], ring[(i + 1) % k]
            s1, s2 = self.rank[u1] > lv, self.rank[u2] > lv
            if s1 == s2:
                continue
            u_lo, u_hi = (u2, u1) if s1 else (u1, u2)
            r_lo = pers.mins.comp_root(u_lo, lv)
            r_hi = pers.maxs.comp_root(u_hi, pers.max_key[v])
            if pers.mins.death_vertex[r_lo] != v \
                    or pers.maxs.death_vertex[r_hi] != v:
                continue
            for p in mins_at:
                if pers.mins.event[r_lo] < p.event:
                    continue
                for q in maxs_at:
                    if pers.maxs.event[r_hi] < q.event:
                        continue
                    uf.union(idx[(p.rid, int(r_lo))], idx[(q.rid, int(r_hi))])

    def _germ_swallowed(self, g: Germ, owner: Region, u: Region) -> bool:
        ms = self.ms
        if owner.sense == "min":
            pinch = self.rank[ms.edge_hi[g.eid]] - 0.5 == g.rho
        else:
            pinch = self.rank[ms.edge_lo[g.eid]] + 0.5 == g.rho
        if pinch:
            return self._vertex_interior(owner.vertex, u.pieces)
        cut = int(g.rho + 0.5) if owner.sense == "min" else int(g.rho - 0.5)
        for q in u.pieces:
            if q is owner:
                continue
            got = self._coverage(q).get(g.eid)
            if got is None:
                continue
            _, qcut = got
            if qcut < 0:
                return True
            if owner.sense == "min":
                if q.sense == "max" and qcut <= cut:
                    return True
                if q.sense == "min" and qcut > cut:
                    return True
            else:
                if q.sense == "min" and qcut >= cut:
                    return True
                if q.sense == "max" and qcut < cut:
                    return True
        return False

    def facets(self) -> list[Facet]:
        if self._facets is not None:
            return self._facets
        out = []
        key_map: dict[tuple[int, tuple], Facet] = {}
        order = sorted(self.alive_regions(),
                       key=lambda r: (self.depth[r.rid], r.rid))
        for reg in order:
            if reg.sense == "root":
                f = Facet((reg.rid, -1), reg, [])
                out.append(f)
                key_map[(reg.rid, f.key)] = f
            elif reg.sense == "union":
                for key, members, germs in self._union_facets(reg):
                    f = Facet(key, reg, germs)
                    out.append(f)
                    for m in members:
                        key_map[(reg.rid, m)] = f
            else:
                for key, germs in sorted(self._region_germs(reg).items()):
                    f = Facet(key, reg, germs)
                    out.append(f)
                    key_map[(reg.rid, key)] = f
        # every region whose area reaches the image border paints the frame;
        # those are exactly the regions holding the corner site, and the flag
        # is moot for facets whose own curves cross the frame
        for reg in self.owner_chain(self.owner_of_site(0)):
            if reg.sense == "root":
                key = (reg.rid, -1)
            elif reg.sense == "union":
                key = None
                for p in reg.pieces:
                    if self.pers.interior_site(p, 0):
                        key = (p.rid, self._branch_of_site(p, 0))
                        break
            else:
                key = (reg.rid, self._branch_of_site(reg, 0))
            f = key_map.get((reg.rid, key)) if key is not None else None
            if f is None:
                f = next(x for x in out if x.region is reg)
            f.has_frame = True
        self._facets = out
        return out

    # --- verification --------------------------------------------------------------------

    def verify(self, inject_fault: str | None = None) -> dict:
        checks = {}
        failures: list[dict] = []
        restore = None
        if inject_fault == "boundary-value":
            victim = next(r for r in self.alive_regions() if r.sense != "root")
            restore = ("bv", victim.rid, self._bv[victim.rid])
            self._bv[victim.rid] += 1.0 + abs(self._bv[victim.rid]) * 0.01
        elif inject_fault == "segment-owner":
            restore = self._inject_owner_fault()
        elif inject_fault is not None:
            raise ValueError(f"unknown fault {inject_fault!r}")
        try:
            checks["partition"] = self._check_partition(failures)
            checks["laminar"] = self._check_laminar(failures)
            checks["closed"] = self._check_closed(failures)
            checks["dominated"] = self._check_dominated(failures)
            checks["certificates"] = self._check_certificates(failures)
            checks["boundary_values"] = self._check_boundary_values(failures)
        finally:
            if restore is not None:
                if restore[0] == "bv":
                    self._bv[restore[1]] = restore[2]
                else:
                    self.edge_owners[restore[1]] = restore[2]
        return {"ok": all(checks.values()), "checks": checks,
                "failures": failures}

    def _inject_owner_fault(self):
        for eid, owners in self.edge_owners.items():
            bounds = self.edge_bounds[eid]
            for i, o in enumerate(owners):
                for r in self.alive_regions():
                    if r is o or r.sense == "root":
                        continue
                    if not self._owner_covers(r, eid, bounds[i],
                                              bounds[i + 1]):
                        bak = (eid, list(owners))
                        owners[i] = r
                        return ("owner",) + bak
        raise LensInvalidError("no segment available for fault injection")

    def _check_partition(self, failures) -> bool:
        ok = True
        total = 0.0
        for eid, owners in self.edge_owners.items():
            bounds = self.edge_bounds[eid]
            for i, o in enumerate(owners):
                lo_r, hi_r = bounds[i], bounds[i + 1]
                total += self.real_at_rank(hi_r) - self.real_at_rank(lo_r)
                if not self._owner_covers(o, eid, lo_r, hi_r):
                    ok = False
                    failures.append({"check": "partition", "edge": eid,
                                     "segment": i, "owner": o.rid,
                                     "detail": "owner does not cover span"})
        ttv = self.ms.ttv
        if abs(total - ttv) > 1e-9 * max(1.0, abs(ttv)):
            ok = False
            failures.append({"check": "partition",
                             "detail": f"own lengths sum {total}, ttv {ttv}"})
        return ok

    def _check_laminar(self, failures) -> bool:
        ok = True
        ms = self.ms
        for e in ms.edges:
            cover: dict[int, Region] = {}
            for a in self._lineage("min", e.lo):
                o = self.final_owner(a)
                if o is not None:
                    cover[o.rid] = o
            for b in self._lineage("max", e.hi):
                o = self.final_owner(b)
                if o is not None:
                    cover[o.rid] = o
            regs = list(cover.values())
            spans = [self._region_intervals(r, e.id) for r in regs]
            for i in range(len(regs)):
                for j in range(i + 1, len(regs)):
                    hit = any(a1 <= b2 and a2 <= b1
                              for a1, b1 in spans[i] for a2, b2 in spans[j])
                    if hit and not (self.region_subset(regs[i], regs[j])
                                    or self.region_subset(regs[j], regs[i])):
                        ok = False
                        failures.append({"check": "laminar", "edge": e.id,
                                         "regions": [regs[i].rid,
                                                     regs[j].rid]})
        by_vertex: dict[int, list[tuple[Region, Region]]] = {}
        for reg in self.alive_regions():
            for p in self._pieces(reg):
                if p.sense in ("min", "max"):
                    by_vertex.setdefault(p.vertex, []).append((reg, p))
        for v, entries in by_vertex.items():
            for i in range(len(entries)):
                for j in range(i + 1, len(entries)):
                    r1, p1 = entries[i]
                    r2, p2 = entries[j]
                    if r1 is r2 or p1.sense == p2.sense:
                        continue
                    if not (self.region_subset(r1, r2)
                            or self.region_subset(r2, r1)):
                        ok = False
                        failures.append({"check": "laminar", "vertex": v,
                                         "regions": [r1.rid, r2.rid]})
        return ok

    def _check_closed(self, failures) -> bool:
        """Every extremum interior to a region must die no further than the
        region's own boundary."""
        ok = True
        pers = self.pers
        piece_rids = set()
        for reg in self.alive_regions():
            for p in self._pieces(reg):
                piece_rids.add(p.rid)
        for sense, sweep in (("min", pers.mins), ("max", pers.maxs)):
            for p in self.ms.extrema(sense):
                p = int(p)
                if sweep.death_key[p] == INF_KEY:
                    continue
                d = int(sweep.death_vertex[p])
                for reg in self._lineage(sense, p):
                    if reg.rid not in piece_rids:
                        continue
                    if not pers.closure_site(reg, d):
                        ok = False
                        failures.append({"check": "closed",
                                         "region": reg.rid, "extremum": p})
        return ok

    def _check_dominated(self, failures) -> bool:
        ok = True
        for reg in self.alive_regions():
            if reg.sense == "root":
                continue
            if not self._dominated(reg):
                ok = False
                failures.append({"check": "dominated", "region": reg.rid})
        return ok

    def apogees(self, reg: Region) -> list[int]:
        if reg.sense != "union":
            return self.pers.apogees(reg)
        out = [p.vertex for p in reg.pieces
               if not self._vertex_interior(p.vertex, reg.pieces)]
        return sorted(set(out))

    def _apogee_piece(self, reg: Region) -> Region:
        if reg.sense != "union":
            return reg
        return max(reg.pieces, key=lambda p: (p.persistence, -p.rid))

    def _dominated(self, reg: Region) -> bool:
        pers = self.pers
        piece = self._apogee_piece(reg)
        sw = pers.mins if piece.sense == "min" else pers.maxs
        key = pers.min_key if piece.sense == "min" else pers.max_key
        exits = [piece.vertex] if reg.sense != "union" else self.apogees(reg)
        for q in exits:
            cands = []
            if q == piece.vertex:
                cands.append(int(sw.nxt[piece.extremum]))
                cands.extend(int(r) for r in
                             sw.events_at[q][:piece.event - 1])
            for z in cands:
                if z >= 0 and self._qualifies(reg, piece, q, z, sw, key):
                    return True
        if reg.sense != "union":
            return False
        for q in exits:
            for z in self.ms.extrema(piece.sense):
                if self._qualifies(reg, piece, q, int(z), sw, key):
                    return True
        return False

    def _qualifies(self, reg, piece, q, z, sw, key) -> bool:
        if z == piece.extremum:
            return False
        if piece.sense == "min":
            if self.real[z] > self.real[piece.extremum]:
                return False
        else:
            if self.real[z] < self.real[piece.extremum]:
                return False
        if key[z] >= key[q]:
            return False
        meeting = set(sw.events_at.get(q, ())) | {sw.birth[q]}
        if sw.comp_root(z, key[q]) not in meeting:
            return False
        if self.interior_site(reg, z):
            return False
        verts, _ = self.ms.vertex_path(q, z)
        return not any(self.interior_site(reg, u) for u in verts[1:])

    def _check_certificates(self, failures) -> bool:
        ok = True
        ms = self.ms
        pers = self.pers
        for reg in self.alive_regions():
            if reg.sense == "root":
                continue
            piece = self._apogee_piece(reg)
            cert = pers.certificate(piece)
            verts = cert["path_vertices"]
            good = verts[0] == piece.vertex and verts[-1] == cert["dominator"]
            for eid, (a, b) in zip(cert["path_edges"], zip(verts, verts[1:])):
                e = ms.edges[eid]
                if {int(e.lo), int(e.hi)} != {a, b}:
                    good = False
            sgn = -1 if piece.sense == "min" else 1
            kq = sgn * int(self.rank[verts[0]])
            km = sgn * int(self.rank[cert["dominator"]])
            for u in verts[1:]:
                ku = sgn * int(self.rank[u])
                if not (kq < ku <= km):
                    good = False
                if pers.interior_site(piece, u):
                    good = False
            if not good:
                ok = False
                failures.append({"check": "certificates", "region": reg.rid})
        return ok

    def _check_boundary_values(self, failures) -> bool:
        ok = True
        for reg in self.alive_regions():
            if reg.sense == "root":
                continue
            want = {float(self.real[p.vertex]) for p in self._pieces(reg)}
            if want != {self._bv[reg.rid]}:
                ok = False
                failures.append({"check": "boundary_values",
                                 "region": reg.rid})
        return ok
