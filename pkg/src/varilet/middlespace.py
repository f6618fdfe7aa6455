"""Middle space of the monotone-light factorization: the contour tree.

The interpolated surface f factors as f = lam . mu, where mu collapses
each connected component of each level set to a point and lam reads the
level back off.  On a piecewise-monotone mesh the quotient is a tree, and
mesh-graph components at a perturbed level probe coincide with continuum
components, so it can be assembled combinatorially:

  1. two merge sweeps over the perturbed site order build the join and
     split trees (each sweep records, per site, where its super- or
     sublevel component is absorbed),
  2. leaves are peeled off both trees simultaneously, emitting one tree
     arc per peeled site, until the full site tree is out,
  3. degree-(1,1) sites are contracted into chains, leaving vertices
     (extrema and saddles) joined by edges that carry their chains.

Every mesh edge maps to a monotone path in the tree.  The total
transformed variation ttv(f) is the sum of real edge lengths
lam(hi) - lam(lo) over contracted edges; the varilet construction later
splits exactly this quantity additively.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .ingest import PatchMesh
from .levels import LevelOrder


@dataclass
class Edge:
    """Contracted tree edge from vertex `lo` up to vertex `hi`.

    `chain` holds the regular sites strictly between them, ascending.
    """

    id: int
    lo: int
    hi: int
    chain: list[int]
    chain_ranks: list[int] = field(repr=False, default_factory=list)


def _merge_arcs(sweep, rank, indptr, indices, descending):
    """One merge-tree sweep over `sweep` (sites in processing order).

    Returns (arc, indeg): arc[x] is the site whose processing absorbed the
    component rooted at x, and indeg[v] counts the components absorbed at
    v.  The root of every processed component is its most recently
    processed site, so arcs attach directly to union-find roots.
    """
    n = len(sweep)
    parent = list(range(n))
    arc = [-1] * n
    indeg = [0] * n
    for v in sweep:
        rv = rank[v]
        for j in range(indptr[v], indptr[v + 1]):
            u = indices[j]
            if (rank[u] > rv) if descending else (rank[u] < rv):
                r = u
                while parent[r] != r:
                    parent[r] = parent[parent[r]]
                    r = parent[r]
                if r != v:
                    arc[r] = v
                    indeg[v] += 1
                    parent[r] = v
    return arc, indeg


def _contour_merge(jt_down, up_j, st_up, down_s, n):
    """Peel leaves off the join and split trees, emitting site-tree arcs.

    up_j and down_s double as the contour-tree up/down degrees; both are
    consumed in place.  Returns parallel lists (upper site, lower site).
    """
    removed = bytearray(n)
    jt_ptr = list(jt_down)
    st_ptr = list(st_up)

    def resolve(ptr, x):
        r = ptr[x]
        if not removed[r]:
            return r
        seen = [x]
        while removed[r]:
            seen.append(r)
            r = ptr[r]
        for s in seen:
            ptr[s] = r
        return r

    queue = deque(v for v in range(n) if up_j[v] + down_s[v] == 1)
    up_e = []
    dn_e = []
    while queue and len(up_e) < n - 1:
        v = queue.popleft()
        if removed[v] or up_j[v] + down_s[v] != 1:
            continue
        if up_j[v] == 0:
            w = resolve(jt_ptr, v)
            up_e.append(v)
            dn_e.append(w)
            removed[v] = 1
            up_j[w] -= 1
        else:
            w = resolve(st_ptr, v)
            up_e.append(w)
            dn_e.append(v)
            removed[v] = 1
            down_s[w] -= 1
        if not removed[w] and up_j[w] + down_s[w] == 1:
            queue.append(w)
    if len(up_e) != n - 1:
        raise AssertionError("contour merge stalled before spanning all sites")
    return up_e, dn_e


class MiddleSpace:
    """Contour tree of a mesh: site tree, contracted edges, and services.

    Sites keep their mesh ids.  `ct_up[s]` / `ct_down[s]` list the sites
    directly above/below s in the site tree, sorted by rank.  Vertices are
    the sites whose degree pair differs from (1, 1); `site_edge` maps every
    regular site to the contracted edge and chain position carrying it.
    """

    def __init__(self, mesh: PatchMesh, order: LevelOrder,
                 ct_up, ct_down, is_vertex, vertices, vertex_kind,
                 edges, site_edge, site_edge_pos,
                 vertex_up_edges, vertex_down_edges):
        self.mesh = mesh
        self.order = order
        self.rank = order.rank
        self.real = mesh.site_values
        self.ct_up = ct_up
        self.ct_down = ct_down
        self.is_vertex = is_vertex
        self.vertices = vertices
        self.vertex_kind = vertex_kind
        self.edges = edges
        self.site_edge = site_edge
        self.site_edge_pos = site_edge_pos
        self.vertex_up_edges = vertex_up_edges
        self.vertex_down_edges = vertex_down_edges
        self.vertex_index = {v: i for i, v in enumerate(vertices)}
        self.edge_lo = np.array([e.lo for e in edges], dtype=np.int64)
        self.edge_hi = np.array([e.hi for e in edges], dtype=np.int64)
        self.ttv = float(np.sum(self.real[self.edge_hi] - self.real[self.edge_lo]))
        self._anchor_rep = None
        self._site_tree = None
        self._vtree = None

    @property
    def n_sites(self) -> int:
        return len(self.ct_up)

    def extrema(self, kind: str) -> list[int]:
        return [v for v in self.vertices if self.vertex_kind[v] == kind]

    # --- anchors -----------------------------------------------------------

    def anchor(self, site: int) -> tuple[float, float]:
        """Image position representing a vertex.

        Split-cell saddles anchor at their interior point.  Sample sites
        anchor at the first sample position, in scan order, of their
        real-value-tied mesh component, so plateau vertices report a stable
        location.
        """
        mesh = self.mesh
        if site >= mesh.n_samples:
            return mesh.site_position(site)
        if self._anchor_rep is None:
            from .unionfind import UnionFind

            uf = UnionFind(mesh.n_sites)
            eu, ev = mesh.edges_u, mesh.edges_v
            tied = np.nonzero(self.real[eu] == self.real[ev])[0]
            for i in tied.tolist():
                uf.union(int(eu[i]), int(ev[i]))
            best = {}
            w = mesh.width
            for s in range(mesh.n_samples):
                r = uf.find(s)
                if r not in best or s < best[r]:
                    best[r] = s
            self._anchor_rep = (uf, best)
        uf, best = self._anchor_rep
        rep = best[uf.find(site)]
        return mesh.site_position(rep)

    # --- rooted site tree (for cut-side tests) -----------------------------

    def site_tree(self):
        """(parent, tin, tout) of the site tree rooted at the global min."""
        if self._site_tree is None:
            n = self.n_sites
            root = int(self.order.order[0])
            parent = [-1] * n
            parent[root] = root
            bfs = [root]
            seen = bytearray(n)
            seen[root] = 1
            for x in bfs:
                for y in self.ct_up[x]:
                    if not seen[y]:
                        seen[y] = 1
                        parent[y] = x
                        bfs.append(y)
                for y in self.ct_down[x]:
                    if not seen[y]:
                        seen[y] = 1
                        parent[y] = x
                        bfs.append(y)
            children = [[] for _ in range(n)]
            for x in bfs[1:]:
                children[parent[x]].append(x)
            tin = [0] * n
            tout = [0] * n
            t = 0
            stack = [(root, False)]
            while stack:
                x, done = stack.pop()
                if done:
                    tout[x] = t
                    continue
                tin[x] = t
                t += 1
                stack.append((x, True))
                for ch in children[x]:
                    stack.append((ch, False))
            self._site_tree = (parent, tin, tout)
        return self._site_tree

    def cut_side(self, lo_site: int, hi_site: int):
        """Membership test for one side of the tree cut at arc (lo, hi).

        Returns (child, test) where test(x) is True iff x lies on the
        child's side of the cut.
        """
        parent, tin, tout = self.site_tree()
        child = hi_site if parent[hi_site] == lo_site else lo_site
        if parent[child] not in (lo_site, hi_site) or child == parent[child]:
            raise ValueError("cut_side expects a site-tree arc")
        ci, co = tin[child], tout[child]

        def test(x: int) -> bool:
            return ci <= tin[x] < co

        return child, test

    # --- rooted vertex tree with LCA (for paths in the contracted tree) ----

    def _vertex_tree(self):
        if self._vtree is None:
            nv = len(self.vertices)
            par = [0] * nv
            par_edge = [-1] * nv
            depth = [0] * nv
            seen = bytearray(nv)
            seen[0] = 1
            bfs = [0]
            for vi in bfs:
                v = self.vertices[vi]
                for eid in self.vertex_up_edges[v] + self.vertex_down_edges[v]:
                    e = self.edges[eid]
                    other = e.hi if e.lo == v else e.lo
                    oi = self.vertex_index[other]
                    if not seen[oi]:
                        seen[oi] = 1
                        par[oi] = vi
                        par_edge[oi] = eid
                        depth[oi] = depth[vi] + 1
                        bfs.append(oi)
            logn = max(1, (nv - 1).bit_length())
            up = [par]
            for k in range(1, logn):
                prev = up[-1]
                up.append([prev[prev[i]] for i in range(nv)])
            self._vtree = (par, par_edge, depth, up)
        return self._vtree

    def vertex_path(self, a: int, b: int):
        """Path a -> b in the contracted tree: (vertex list, edge id list)."""
        par, par_edge, depth, up = self._vertex_tree()
        ai, bi = self.vertex_index[a], self.vertex_index[b]
        x, y = ai, bi
        if depth[x] < depth[y]:
            x, y = y, x
        diff = depth[x] - depth[y]
        k = 0
        while diff:
            if diff & 1:
                x = up[k][x]
            diff >>= 1
            k += 1
        if x != y:
            for k in range(len(up) - 1, -1, -1):
                if up[k][x] != up[k][y]:
                    x, y = up[k][x], up[k][y]
        lca = par[x] if x != y else x

        left_v, left_e = [], []
        x = ai
        while x != lca:
            left_v.append(self.vertices[x])
            left_e.append(par_edge[x])
            x = par[x]
        right_v, right_e = [], []
        y = bi
        while y != lca:
            right_v.append(self.vertices[y])
            right_e.append(par_edge[y])
            y = par[y]
        verts = left_v + [self.vertices[lca]] + right_v[::-1]
        return verts, left_e + right_e[::-1]


def build_middle_space(mesh: PatchMesh) -> MiddleSpace:
    order = LevelOrder(mesh.site_values)
    n = mesh.n_sites
    rank = order.rank.tolist()
    indptr = mesh.indptr.tolist()
    indices = mesh.indices.tolist()
    asc = order.order.tolist()

    jt_down, up_j = _merge_arcs(asc[::-1], rank, indptr, indices, descending=True)
    st_up, down_s = _merge_arcs(asc, rank, indptr, indices, descending=False)
    up_e, dn_e = _contour_merge(jt_down, up_j, st_up, down_s, n)

    ct_up = [[] for _ in range(n)]
    ct_down = [[] for _ in range(n)]
    for u, d in zip(up_e, dn_e):
        ct_up[d].append(u)
        ct_down[u].append(d)
    for s in range(n):
        if len(ct_up[s]) > 1:
            ct_up[s].sort(key=rank.__getitem__)
        if len(ct_down[s]) > 1:
            ct_down[s].sort(key=rank.__getitem__)

    is_vertex = bytearray(n)
    vertices = []
    vertex_kind = {}
    for s in range(n):
        ud, dd = len(ct_up[s]), len(ct_down[s])
        if ud == 1 and dd == 1:
            continue
        is_vertex[s] = 1
        vertices.append(s)
        vertex_kind[s] = "max" if ud == 0 else ("min" if dd == 0 else "saddle")

    edges = []
    site_edge = np.full(n, -1, dtype=np.int64)
    site_edge_pos = np.full(n, -1, dtype=np.int64)
    vertex_up_edges = {v: [] for v in vertices}
    vertex_down_edges = {v: [] for v in vertices}
    for v in vertices:
        for u in ct_up[v]:
            chain = []
            x = u
            while not is_vertex[x]:
                chain.append(x)
                x = ct_up[x][0]
            eid = len(edges)
            edges.append(Edge(id=eid, lo=v, hi=x, chain=chain,
                              chain_ranks=[rank[c] for c in chain]))
            vertex_up_edges[v].append(eid)
            vertex_down_edges[x].append(eid)
            for pos, c in enumerate(chain):
                site_edge[c] = eid
                site_edge_pos[c] = pos

    return MiddleSpace(
        mesh=mesh, order=order,
        ct_up=ct_up, ct_down=ct_down,
        is_vertex=is_vertex, vertices=vertices, vertex_kind=vertex_kind,
        edges=edges, site_edge=site_edge, site_edge_pos=site_edge_pos,
        vertex_up_edges=vertex_up_edges, vertex_down_edges=vertex_down_edges,
    )
