"""The varilet decomposition carried by a resolved lens.

Every region of the lens contributes one component: the part of the
function's variation that happens strictly inside the region, clamped at
its boundary value.  Writing b for boundary values (zero for the root)
and chasing a site's owner chain R_1 in R_2 in ... in root, the component
of R_k at that site is c_{k-1} - b_k, where c_0 is the site's value and
c_k = b_k.  The sum telescopes back to the original function, and any
reweighting sum a_k g_k stays piecewise affine over the segment table:
on a segment owned by R the combination equals a_R * level + W_R with
W_R = W_parent + (a_parent - a_R) * b_R accumulated from the root.  All
combination queries (images, point evaluation, simplification, total
variation) reduce to that affine form.

Simplification keeps a subset of regions whose indicator is downward
closed along owner chains (every kept region's parent is kept).  The
simplified function is the combination of the kept indicator; its middle
space is rebuilt by contracting zero-slope segments, which is where the
guarantees live: extrema only merge, never appear, and persistence never
grows.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .errors import ImproperSimplificationError, NotDownwardClosedError
from .ingest import _RING, evaluate
from .lens import Lens
from .persistence import ElderSweep, INF_KEY
from .tracing import facet_boundary, locate_level_edge, polygon_area


class Transform:
    """Varilet components, combinations, and simplification for one lens."""

    def __init__(self, lens: Lens):
        self.lens = lens
        self.ms = lens.ms
        self.mesh = lens.ms.mesh
        regions = lens.alive_regions()
        self.rids = [r.rid for r in regions]
        self._slot = {rid: i for i, rid in enumerate(self.rids)}
        self.b = np.array([0.0 if r.sense == "root" else lens.boundary_value(r)
                           for r in regions])
        self._order_topo = sorted(regions, key=lambda r: lens.depth[r.rid])
        self._sample_owner = None
        self._areas = None

    # --- affine weights of a combination ---------------------------------------

    def _coeff_vector(self, coeffs) -> np.ndarray:
        a = np.zeros(len(self.rids))
        if isinstance(coeffs, dict):
            for rid, v in coeffs.items():
                a[self._slot[rid]] = v
        else:
            for rid, v in zip(self.rids, coeffs):
                a[self._slot[rid]] = v
        return a

    def _weights(self, a: np.ndarray) -> np.ndarray:
        w = np.zeros_like(a)
        for reg in self._order_topo:
            parent = self.lens.parent[reg.rid]
            if parent is None:
                continue
            i, ip = self._slot[reg.rid], self._slot[parent.rid]
            w[i] = w[ip] + (a[ip] - a[i]) * self.b[i]
        return w

    def _owner_slots(self) -> np.ndarray:
        if self._sample_owner is None:
            own = np.empty(self.mesh.n_samples, dtype=np.int64)
            for s in range(self.mesh.n_samples):
                own[s] = self._slot[self.lens.owner_of_site(s).rid]
            self._sample_owner = own
        return self._sample_owner

    # --- combinations ------------------------------------------------------------

    def combine(self, coeffs) -> np.ndarray:
        """Image of sum a_i g_i at the sample grid."""
        a = self._coeff_vector(coeffs)
        w = self._weights(a)
        own = self._owner_slots()
        vals = a[own] * self.ms.real[:self.mesh.n_samples] + w[own]
        return vals.reshape(self.mesh.height, self.mesh.width)

    def component(self, rid: int) -> np.ndarray:
        return self.combine({rid: 1.0})

    def reconstruct(self) -> np.ndarray:
        return self.combine({rid: 1.0 for rid in self.rids})

    def combination_ttv(self, coeffs) -> float:
        """Total traversed variation of sum a_i g_i: the own lengths of the
        segment table, each scaled by its owner's weight."""
        a = self._coeff_vector(coeffs)
        total = 0.0
        for rid in self.rids:
            own = sum(s[3] for s in self.lens.own_segments[rid])
            total += abs(a[self._slot[rid]]) * own
        return total

    def rebuild_middle(self, coeffs) -> "RebuiltMiddle":
        """Middle space of sum a_i g_i, constructed independently of the
        per-region bookkeeping: segments become graph arcs carrying their
        combination values, zero-slope arcs contract, and the quotient is
        swept from scratch."""
        return RebuiltMiddle(self, self._coeff_vector(coeffs))

    def evaluate_combination(self, coeffs, x: float, y: float) -> float:
        """Value of sum a_i g_i at an arbitrary image point, resolved
        through the point's position in the middle space."""
        a = self._coeff_vector(coeffs)
        w = self._weights(a)
        ms = self.ms
        mesh = self.mesh
        val = evaluate(mesh, x, y)
        probe = ms.order.probe_at_value(val)
        owner = None
        for u, v in self._face_pairs(x, y):
            ru, rv = ms.rank[u], ms.rank[v]
            if (ru < probe.rho < rv) or (rv < probe.rho < ru):
                eid = locate_level_edge(ms, u, v, probe.rho)
                bounds = self.lens.edge_bounds[eid]
                i = bisect.bisect_left(bounds, probe.rho) - 1
                owner = self.lens.edge_owners[eid][i]
                break
        if owner is None:
            # the probe clears every face edge only at a site's exact level
            cands = [s for pair in self._face_pairs(x, y) for s in pair]
            s = min(cands, key=lambda t: abs(float(ms.real[t]) - val))
            owner = self.lens.owner_of_site(s)
        i = self._slot[owner.rid]
        return float(a[i] * val + w[i])

    def _face_pairs(self, x: float, y: float):
        """Mesh-edge site pairs of the face containing the point."""
        mesh = self.mesh
        from .ingest import _cell_of_point
        cx, cy = _cell_of_point(mesh, x, y)
        w = mesh.width
        c00 = cy * w + cx
        ring = (c00, c00 + 1, c00 + w + 1, c00 + w)
        cell = cy * (w - 1) + cx
        k = int(mesh.cell_saddle[cell])
        if k < 0:
            return [(ring[i], ring[(i + 1) % 4]) for i in range(4)]
        sad = mesh.n_samples + k
        spx, spy = mesh.saddle_pos[k]
        sx, sy = spx - cx, spy - cy
        u, v = x - cx, y - cy
        best = None
        for i in range(4):
            ax, ay = _RING[i]
            bx, by = _RING[(i + 1) % 4]
            det = (bx - ax) * (sy - ay) - (by - ay) * (sx - ax)
            if det == 0.0:
                continue
            wa = ((bx - u) * (sy - v) - (by - v) * (sx - u)) / det
            wb = ((sx - u) * (ay - v) - (sy - v) * (ax - u)) / det
            low = min(wa, wb, 1.0 - wa - wb)
            if best is None or low > best[0]:
                best = (low, i)
        i = best[1]
        p, q = ring[i], ring[(i + 1) % 4]
        return [(p, q), (p, sad), (q, sad)]

    # --- measures ------------------------------------------------------------------

    def measures(self, kind: str = "persistence") -> dict[int, float]:
        lens = self.lens
        if kind == "persistence":
            return {rid: lens.regions[rid].persistence for rid in self.rids}
        if kind == "ttv":
            return {rid: sum(s[3] for s in lens.own_segments[rid])
                    for rid in self.rids}
        if kind == "contrast":
            out = {}
            for rid in self.rids:
                reg = lens.regions[rid]
                vals = []
                for _, lo_r, hi_r, _ in lens.own_segments[rid]:
                    vals.append(lens.real_at_rank(lo_r))
                    vals.append(lens.real_at_rank(hi_r))
                if reg.sense != "root":
                    vals.append(lens.boundary_value(reg))
                vals.extend(lens.boundary_value(c) for c in lens.children[rid])
                out[rid] = max(vals) - min(vals) if vals else 0.0
            return out
        if kind == "area":
            return self.areas()
        raise ValueError(f"unknown measure {kind!r}")

    def areas(self) -> dict[int, float]:
        """Image area owned by each region: its facets' signed loop areas
        minus the area of its children."""
        if self._areas is not None:
            return self._areas
        lens = self.lens
        gross = {rid: 0.0 for rid in self.rids}
        for f in lens.facets():
            loops = facet_boundary(self.ms, f.germs, f.has_frame)
            gross[f.region.rid] += sum(polygon_area(lp) for lp in loops)
        out = {}
        for rid in self.rids:
            out[rid] = gross[rid] - sum(gross[c.rid]
                                        for c in lens.children[rid])
        self._areas = out
        return out

    # --- simplification ---------------------------------------------------------------

    def _check_keep(self, keep) -> set[int]:
        keep = set(keep)
        unknown = keep - set(self.rids)
        if unknown:
            raise ValueError(f"unknown region ids {sorted(unknown)}")
        root = self.lens.root.rid
        if root not in keep:
            raise ImproperSimplificationError("the root region must be kept")
        for rid in keep:
            parent = self.lens.parent[rid]
            if parent is not None and parent.rid not in keep:
                raise NotDownwardClosedError(
                    f"region {rid} kept while its parent {parent.rid} is dropped")
        return keep

    def simplify(self, keep) -> "Simplified":
        keep = self._check_keep(keep)
        if len(keep) == len(self.rids):
            raise ImproperSimplificationError(
                "simplification must drop at least one region")
        return self._apply(keep)

    def _apply(self, keep) -> "Simplified":
        return Simplified(self, frozenset(keep))

    # --- scale space ------------------------------------------------------------------

    def anchored_measure(self, kind: str = "persistence") -> dict[int, float]:
        """Measure forced non-increasing along containment chains (root
        included), so threshold sets are downward closed."""
        m = self.measures(kind)
        out = {}
        for reg in self._order_topo:
            parent = self.lens.parent[reg.rid]
            cap = np.inf if parent is None else out[parent.rid]
            out[reg.rid] = min(m[reg.rid], cap)
        return out

    def threshold_keep(self, t: float, anc: dict[int, float]) -> frozenset:
        """Regions whose whole containment chain measures at least t.  A
        threshold above the root's own measure empties the set."""
        return frozenset(rid for rid, v in anc.items() if v >= t)

    def scale_space(self, count: int | None = None, thresholds=None,
                    measure: str = "persistence") -> list["ScaleLevel"]:
        """Nested simplifications, coarsest first.  Explicit thresholds are
        used as given; otherwise `count` distinct levels are chosen from
        the achievable ones."""
        anc = self.anchored_measure(measure)
        if thresholds is None:
            if count is None:
                raise ValueError("need count or thresholds")
            cands = sorted(set(anc.values()), reverse=True)
            seen = set()
            levels = []
            for t in cands:
                k = self.threshold_keep(t, anc)
                if k not in seen:
                    seen.add(k)
                    levels.append((t, k))
            if count > len(levels):
                raise ValueError(
                    f"only {len(levels)} distinct scales are achievable")
            idx = np.linspace(0, len(levels) - 1, count)
            picked = sorted({int(round(i)) for i in idx})
            levels = [levels[i] for i in picked]
        else:
            seen = set()
            levels = []
            for t in sorted(thresholds, reverse=True):
                k = self.threshold_keep(float(t), anc)
                if k not in seen:
                    seen.add(k)
                    levels.append((float(t), k))
        return [ScaleLevel(t, k, self._apply(k)) for t, k in levels]

    # --- expressibility of simplifications ----------------------------------------------

    def fit_fraction(self, measure: str = "persistence", seed: int = 0,
                     samples: int = 4096) -> float:
        """Fraction of proper simplifications expressible as a threshold of
        the measure.  Exhaustive when the region forest is small, sampled
        from the downward-closed family otherwise."""
        anc = self.anchored_measure(measure)
        root = self.lens.root.rid
        non_root = [r for r in self._order_topo if r.sense != "root"]
        if not non_root:
            return 1.0

        def expressible(keep: frozenset) -> bool:
            return self.threshold_keep(min(anc[rid] for rid in keep),
                                       anc) == keep

        if len(non_root) <= 18:
            total = 0
            hits = 0
            kids = {rid: [c for c in self.lens.children[rid]
                          if c.rid in set(r.rid for r in non_root)]
                    for rid in self.rids}

            def enum(pending, chosen):
                nonlocal total, hits
                if not pending:
                    keep = frozenset(chosen)
                    if len(keep) == len(self.rids):
                        return
                    total += 1
                    hits += expressible(keep)
                    return
                reg = pending[0]
                rest = pending[1:]
                enum(rest, chosen)
                enum(rest + [c for c in kids[reg.rid]], chosen | {reg.rid})

            enum(list(kids[root]), frozenset({root}))
            return hits / total if total else 1.0

        rng = np.random.default_rng(seed)
        total = 0
        hits = 0
        while total < samples:
            chosen = {root}
            for reg in self._order_topo:
                if reg.sense == "root":
                    continue
                if self.lens.parent[reg.rid].rid in chosen \
                        and rng.random() < 0.5:
                    chosen.add(reg.rid)
            if len(chosen) == len(self.rids):
                continue
            total += 1
            hits += expressible(frozenset(chosen))
        return hits / total


@dataclass
class ScaleLevel:
    threshold: float
    keep: frozenset
    simplified: "Simplified"


class Simplified:
    """One downward-closed reweighting of the varilet family to {0, 1}."""

    def __init__(self, tr: Transform, keep: frozenset):
        self.transform = tr
        self.keep = keep
        self.a = {rid: (1.0 if rid in keep else 0.0) for rid in tr.rids}
        self._values = None
        self._middle = None

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = self.transform.combine(self.a)
        return self._values

    def dropped_level(self, s: int) -> float | None:
        """Boundary value of the largest dropped region on a sample's owner
        chain, None if the sample keeps its original value."""
        tr = self.transform
        out = None
        for reg in tr.lens.owner_chain(tr.lens.owner_of_site(s)):
            if reg.rid not in self.keep:
                out = tr.lens.boundary_value(reg)
        return out

    def middle(self) -> "RebuiltMiddle":
        if self._middle is None:
            self._middle = self.transform.rebuild_middle(self.a)
        return self._middle


class RebuiltMiddle:
    """Middle space of a combination function, rebuilt from the segment
    table: zero-slope segments and value-tied arcs contract, the rest
    survive with their combination values.  Mixed-sign coefficients are
    fine; arcs are ordered by value, not by the original orientation."""

    def __init__(self, tr: Transform, a: np.ndarray):
        lens = tr.lens
        ms = tr.ms
        w = tr._weights(a)
        n_sites = ms.n_sites

        node_id: dict[tuple[int, int], int] = {}
        h: dict[int, float] = {}
        self.continuity_gap = 0.0

        def vertex_node(v: int) -> int:
            if v not in h:
                i = tr._slot[lens.owner_of_site(v).rid]
                h[v] = float(a[i] * ms.real[v] + w[i])
            return v

        def cut_node(eid: int, r: int, value: float) -> int:
            key = (eid, r)
            nid = node_id.get(key)
            if nid is None:
                nid = n_sites + len(node_id)
                node_id[key] = nid
                h[nid] = value
            else:
                gap = abs(h[nid] - value)
                if gap > self.continuity_gap:
                    self.continuity_gap = gap
            return nid

        arcs = []
        zero_pairs = []
        for eid, bounds in lens.edge_bounds.items():
            lo = int(ms.edge_lo[eid])
            hi = int(ms.edge_hi[eid])
            owners = lens.edge_owners[eid]
            prev = vertex_node(lo)
            for i, o in enumerate(owners):
                r = bounds[i + 1]
                slot = tr._slot[o.rid]
                slope = float(a[slot])
                val = float(a[slot] * lens.real_at_rank(r) + w[slot])
                start = float(a[slot] * lens.real_at_rank(bounds[i]) + w[slot])
                gap = abs(start - h[prev])
                if gap > self.continuity_gap:
                    self.continuity_gap = gap
                if i + 1 == len(owners):
                    node = vertex_node(hi)
                    gap = abs(h[node] - val)
                    if gap > self.continuity_gap:
                        self.continuity_gap = gap
                else:
                    node = cut_node(eid, r, val)
                if slope == 0.0:
                    zero_pairs.append((prev, node))
                else:
                    arcs.append((prev, node))
                prev = node

        # an arc whose endpoint values tie is one level-set component of the
        # combination (a flattened region glued onto a plateau), so it
        # contracts just like a zero-slope segment
        zero_pairs.extend((u, v) for u, v in arcs if h[u] == h[v])
        arcs = [(u, v) for u, v in arcs if h[u] != h[v]]

        ids = sorted(h)
        index = {nid: i for i, nid in enumerate(ids)}
        from .unionfind import UnionFind
        uf = UnionFind(len(ids))
        for u, v in zero_pairs:
            uf.union(index[u], index[v])
        classes: dict[int, list[int]] = {}
        for nid in ids:
            classes.setdefault(uf.find(index[nid]), []).append(nid)
        reps = sorted(classes)
        cslot = {c: i for i, c in enumerate(reps)}
        self.members = [classes[c] for c in reps]
        self.h = np.array([h[self.members[i][0]] for i in range(len(reps))])
        self.min_id = np.array([min(m) for m in self.members])

        n = len(reps)
        up_adj = [[] for _ in range(n)]
        down_adj = [[] for _ in range(n)]
        order = sorted(range(n), key=lambda i: (self.h[i], int(self.min_id[i])))
        rank = np.empty(n, dtype=np.int64)
        for pos, i in enumerate(order):
            rank[i] = pos
        for u, v in arcs:
            cu = cslot[uf.find(index[u])]
            cv = cslot[uf.find(index[v])]
            if rank[cu] > rank[cv]:
                cu, cv = cv, cu
            up_adj[cu].append(cv)
            down_adj[cv].append(cu)
        self.rank = rank
        self.up_adj = up_adj
        self.down_adj = down_adj
        self.mins = ElderSweep(n, order, down_adj, rank)
        self.maxs = ElderSweep(n, order[::-1], up_adj, (n - 1) - rank)
        self.ms = ms
        self.n_classes = n
        self.ttv = 0.0
        for u, v in arcs:
            cu = cslot[uf.find(index[u])]
            cv = cslot[uf.find(index[v])]
            self.ttv += abs(float(self.h[cu]) - float(self.h[cv]))

    def extrema_count(self) -> int:
        mins = sum(1 for d in self.down_adj if not d)
        maxs = sum(1 for u in self.up_adj if not u)
        return mins + maxs

    def extrema_classes(self, kind: str) -> list[int]:
        adj = self.down_adj if kind == "min" else self.up_adj
        return [i for i in range(self.n_classes) if not adj[i]]

    def class_has_original(self, i: int, kind: str) -> bool:
        ms = self.ms
        for nid in self.members[i]:
            if nid < ms.n_sites and ms.is_vertex[nid] \
                    and ms.vertex_kind[nid] == kind:
                return True
        return False

    def persistences(self, kind: str) -> list[float]:
        sweep = self.mins if kind == "min" else self.maxs
        out = []
        for r in range(self.n_classes):
            if sweep.death_key[r] != INF_KEY and sweep.birth[r] == r:
                out.append(abs(float(self.h[r])
                               - float(self.h[sweep.death_vertex[r]])))
        return out
