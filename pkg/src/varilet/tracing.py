"""Level-curve tracing on the piecewise-monotone mesh.

A perturbed level probe (levels.Probe) never sits at a site rank, so its
level set is a 1-manifold that crosses mesh edges transversally and meets
every monotone face in at most one arc.  Curves are traced face to face:
each face straddled by the probe has exactly two straddled boundary edges,
one in and one out.  Real crossing positions come from a clamped inverse
interpolation of the edge's real values at the probe's real value; ties
clamp to the perturbed-lower endpoint, which is how boundary curves of
plateau regions pinch onto sample positions.

Curves either close up inside the domain or end on the image border (the
frame).  Open curves are stitched into closed polylines by walking the
frame in the positive perimeter direction (0,0) -> (W-1,0) -> (W-1,H-1) ->
(0,H-1), which keeps the domain on the algebraic left, matching the
facet-on-the-left orientation used for all emitted loops.
"""

from __future__ import annotations

import bisect
from typing import NamedTuple

from .errors import UnsupportedMiddlePointError
from .levels import Probe
from .middlespace import MiddleSpace

# =============================================================================
# face and edge tokens
# =============================================================================
# Edge tokens: ('h', x, y) horizontal sample edge, ('v', x, y) vertical,
# ('s', cell, j) spoke from a split cell's saddle to ring corner j.
# Face tokens: ('q', cell) plain bilinear cell, ('t', cell, j) triangle of a
# split cell between ring corners j and j+1.  The corner ring of cell
# (cx, cy) is ((cx,cy), (cx+1,cy), (cx+1,cy+1), (cx,cy+1)).


def _face_at(mesh, cx, cy, side):
    cell = cy * (mesh.width - 1) + cx
    if mesh.cell_saddle[cell] >= 0:
        return ("t", cell, side)
    return ("q", cell)


def edge_faces(mesh, token):
    """The two faces along an edge token; None marks the frame side."""
    kind = token[0]
    if kind == "h":
        _, x, y = token
        below = _face_at(mesh, x, y, 0) if y <= mesh.height - 2 else None
        above = _face_at(mesh, x, y - 1, 2) if y >= 1 else None
        return below, above
    if kind == "v":
        _, x, y = token
        right = _face_at(mesh, x, y, 3) if x <= mesh.width - 2 else None
        left = _face_at(mesh, x - 1, y, 1) if x >= 1 else None
        return right, left
    _, cell, j = token
    return ("t", cell, (j - 1) % 4), ("t", cell, j)


def _side_edge(mesh, cell, j):
    cy, cx = divmod(cell, mesh.width - 1)
    if j == 0:
        return ("h", cx, cy)
    if j == 1:
        return ("v", cx + 1, cy)
    if j == 2:
        return ("h", cx, cy + 1)
    return ("v", cx, cy)


def face_edges(mesh, face):
    if face[0] == "q":
        cell = face[1]
        cy, cx = divmod(cell, mesh.width - 1)
        return (("h", cx, cy), ("v", cx + 1, cy), ("h", cx, cy + 1), ("v", cx, cy))
    _, cell, j = face
    return (_side_edge(mesh, cell, j), ("s", cell, j), ("s", cell, (j + 1) % 4))


def edge_sites(mesh, token):
    kind = token[0]
    w = mesh.width
    if kind == "h":
        _, x, y = token
        s = y * w + x
        return s, s + 1
    if kind == "v":
        _, x, y = token
        s = y * w + x
        return s, s + w
    _, cell, j = token
    c00, c10, c01, c11 = mesh.cell_corners(cell)
    ring = (c00, c10, c11, c01)
    return mesh.saddle_site(int(mesh.cell_saddle[cell])), ring[j]


def edge_token_between(mesh, a, b):
    """Edge token for a pair of mesh-adjacent sites."""
    if a > b:
        a, b = b, a
    if b >= mesh.n_samples:
        sample, saddle = a, b
        cell = int(mesh.saddle_cell[saddle - mesh.n_samples])
        c00, c10, c01, c11 = mesh.cell_corners(cell)
        ring = (c00, c10, c11, c01)
        return ("s", cell, ring.index(sample))
    w = mesh.width
    ya, xa = divmod(a, w)
    yb, xb = divmod(b, w)
    if ya == yb and xb == xa + 1:
        return ("h", xa, ya)
    if xa == xb and yb == ya + 1:
        return ("v", xa, ya)
    raise ValueError(f"sites {a}, {b} are not mesh-adjacent")


def crossing_point(ms: MiddleSpace, token, probe: Probe):
    """Real position where the probe's level crosses a mesh edge.

    Tied endpoints put the crossing exactly at the perturbed-lower one.
    """
    u, v = edge_sites(ms.mesh, token)
    if ms.rank[u] > ms.rank[v]:
        u, v = v, u
    pu = ms.mesh.site_position(u)
    pv = ms.mesh.site_position(v)
    denom = ms.real[v] - ms.real[u]
    if denom <= 0.0:
        return pu
    t = (probe.value - ms.real[u]) / denom
    if t <= 0.0:
        return pu
    if t >= 1.0:
        return pv
    return (pu[0] + t * (pv[0] - pu[0]), pu[1] + t * (pv[1] - pu[1]))


# =============================================================================
# face-to-face march
# =============================================================================


def _march(ms: MiddleSpace, start, probe: Probe, face):
    """Walk the level curve from edge `start` into `face`.

    Returns (tokens, closed): the edges crossed after `start`, and whether
    the walk returned to it (a loop) rather than reaching the frame.
    """
    mesh = ms.mesh
    rank = ms.rank
    rho = probe.rho
    if face is None:
        return [], False
    out = []
    cur = start
    limit = 4 * len(mesh.edges_u) + 8
    while True:
        nxt_edge = None
        for e in face_edges(mesh, face):
            if e == cur:
                continue
            a, b = edge_sites(mesh, e)
            ra, rb = rank[a], rank[b]
            if (ra < rho < rb) or (rb < rho < ra):
                if nxt_edge is not None:
                    raise AssertionError(f"face {face} straddled thrice at {rho}")
                nxt_edge = e
        if nxt_edge is None:
            raise AssertionError(f"no exit from face {face} at {rho}")
        out.append(nxt_edge)
        if nxt_edge == start:
            return out, True
        fa, fb = edge_faces(mesh, nxt_edge)
        face = fb if fa == face else fa
        if face is None:
            return out, False
        cur = nxt_edge
        limit -= 1
        if limit <= 0:
            raise AssertionError("runaway level-curve march")


def trace_from(ms: MiddleSpace, token, probe: Probe):
    """Full curve through `token`: (closed, tokens in traversal order)."""
    fa, fb = edge_faces(ms.mesh, token)
    fwd, closed = _march(ms, token, probe, fa)
    if closed:
        return True, [token] + fwd[:-1]
    bwd, closed_b = _march(ms, token, probe, fb)
    assert not closed_b
    return False, bwd[::-1] + [token] + fwd


def _orient(ms: MiddleSpace, points, tokens, probe: Probe, inside_low: bool, closed: bool):
    """Reverse the traversal if needed so the region side sits on the left.

    The region side of a crossed edge is its perturbed-lower endpoint for
    sublevel regions (inside_low) and the upper one otherwise.  Degenerate
    crossings (clamped, zero-length segments) are skipped; if every test is
    degenerate the traversal is kept as is.
    """
    m = len(points)
    rank = ms.rank
    pos = ms.mesh.site_position
    last = m if closed else m - 1
    for i in range(last):
        p = points[i]
        q = points[(i + 1) % m]
        dx, dy = q[0] - p[0], q[1] - p[1]
        a, b = edge_sites(ms.mesh, tokens[i])
        if rank[a] > rank[b]:
            a, b = b, a
        ins = pos(a) if inside_low else pos(b)
        ux, uy = ins[0] - p[0], ins[1] - p[1]
        cr = dx * uy - dy * ux
        if abs(cr) > 1e-12:
            if cr < 0:
                return points[::-1], tokens[::-1]
            return points, tokens
    return points, tokens


def _dedupe(points):
    out = [points[0]]
    for p in points[1:]:
        if p != out[-1]:
            out.append(p)
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


# =============================================================================
# seeds: from a middle-space cut to a crossing mesh edge
# =============================================================================


def seed_edge(ms: MiddleSpace, eid: int, rho: float):
    """A mesh edge whose curve at `rho` passes the cut (eid, rho)."""
    e = ms.edges[eid]
    nodes = [e.lo] + e.chain + [e.hi]
    lo_r = int(ms.rank[e.lo])
    hi_r = int(ms.rank[e.hi])
    if not (lo_r < rho < hi_r):
        raise ValueError("probe does not cut this edge")
    ranks = [lo_r] + e.chain_ranks + [hi_r]
    i = bisect.bisect_left(ranks, rho) - 1
    s_lo, s_hi = nodes[i], nodes[i + 1]
    child, in_child = ms.cut_side(s_lo, s_hi)
    r_hi = ms.rank[s_hi]
    for u in ms.mesh.neighbors(s_hi).tolist():
        if ms.rank[u] < r_hi and (in_child(u) if child == s_lo else not in_child(u)):
            return edge_token_between(ms.mesh, u, s_hi)
    raise AssertionError("cut has no crossing mesh edge at its upper node")


def locate_level_edge(ms: MiddleSpace, u: int, w: int, rho: float) -> int:
    """Middle-space edge met at level rho by the tree path between mesh
    neighbors u and w (whose image is monotone), with rho strictly inside
    the pair's rank span."""
    if ms.rank[u] > ms.rank[w]:
        u, w = w, u
    assert ms.rank[u] < rho < ms.rank[w]
    eu = int(ms.site_edge[u])
    if eu >= 0:
        if rho < ms.rank[ms.edges[eu].hi]:
            return eu
        vu = ms.edges[eu].hi
    else:
        vu = u
    ew = int(ms.site_edge[w])
    vw = ms.edges[ew].lo if ew >= 0 else w
    prev = vu
    for eid in ms.vertex_path(vu, vw)[1]:
        e = ms.edges[eid]
        nxt = e.hi if e.lo == prev else e.lo
        assert ms.rank[nxt] > ms.rank[prev], "path between mesh neighbors not monotone"
        if ms.rank[prev] < rho < ms.rank[nxt]:
            return eid
        prev = nxt
    assert ew >= 0, "level not crossed anywhere on the path"
    return ew


# =============================================================================
# frame stitching and facet boundaries
# =============================================================================


class Germ(NamedTuple):
    """One boundary cut of a region: the curve at (eid, rho), positioned at
    the cut's real value, with the region below (sublevel) or above."""

    eid: int
    rho: float
    value: float
    below: bool


def _frame_s(mesh, p):
    x, y = p
    w1 = mesh.width - 1
    h1 = mesh.height - 1
    if y == 0.0:
        return x
    if x == float(w1):
        return w1 + y
    if y == float(h1):
        return w1 + h1 + (w1 - x)
    if x == 0.0:
        return 2 * w1 + h1 + (h1 - y)
    raise AssertionError(f"point {p} not on the frame")


def _frame_corners(mesh):
    w1 = mesh.width - 1
    h1 = mesh.height - 1
    return [
        (0.0, (0.0, 0.0)),
        (float(w1), (float(w1), 0.0)),
        (float(w1 + h1), (float(w1), float(h1))),
        (float(2 * w1 + h1), (0.0, float(h1))),
    ], float(2 * (w1 + h1))


def frame_rectangle(mesh):
    corners, _ = _frame_corners(mesh)
    return [c[1] for c in corners]


def _stitch_frame(ms: MiddleSpace, chains):
    """Close frame-touching chains along the positive frame direction.

    Chains must already run facet-on-the-left, so each one enters the
    domain at its first point and exits at its last; the facet then owns
    the frame stretch from each exit forward to the next entry.  Returns
    (loops, walked), where walked is the total frame length traversed.
    """
    mesh = ms.mesh
    corners, total = _frame_corners(mesh)
    recs = []
    for ci, ch in enumerate(chains):
        recs.append((_frame_s(mesh, ch[0]), 1, ci))
        recs.append((_frame_s(mesh, ch[-1]), 0, ci))
    recs.sort()
    # Arcs owned by the facet run from an exit forward to an entry.  Where
    # the boundary touches the frame at a point, a zero-length arc sits
    # inside a longer one, so arcs nest and exits pair with entries like
    # parentheses around the perimeter.
    n = len(recs)
    match = {}
    stack = []
    for k in range(2 * n):
        i = k % n
        if recs[i][1] == 0:
            stack.append(i)
        elif stack:
            j = stack.pop()
            if j not in match:
                match[j] = i
    at = {(kind, ci): i for i, (_, kind, ci) in enumerate(recs)}
    used = [False] * len(chains)
    loops = []
    walked = 0.0
    for start in range(len(chains)):
        if used[start]:
            continue
        loop = []
        cur = start
        while not used[cur]:
            used[cur] = True
            loop.extend(chains[cur])
            i = at[(0, cur)]
            j = match.get(i)
            assert j is not None, "unmatched frame exit"
            s_exit = recs[i][0]
            s_entry = recs[j][0]
            gap = (s_entry - s_exit) % total
            walked += gap
            passed = [(off, pc) for sc, pc in corners
                      if 0.0 < (off := (sc - s_exit) % total) < gap]
            passed.sort()
            loop.extend(pc for _, pc in passed)
            cur = recs[j][2]
        loops.append(loop)
    return loops, walked


def _trace_germ(ms: MiddleSpace, germ: Germ):
    probe = Probe(germ.rho, germ.value)
    seed = seed_edge(ms, germ.eid, germ.rho)
    closed, tokens = trace_from(ms, seed, probe)
    pts = [crossing_point(ms, t, probe) for t in tokens]
    pts, tokens = _orient(ms, pts, tokens, probe, inside_low=germ.below, closed=closed)
    return closed, pts


def facet_boundary(ms: MiddleSpace, germs, has_frame: bool):
    """All boundary loops of one facet, facet on the left of each loop.

    `germs` are the facet's boundary cuts (one traced curve each; distinct
    cuts are disjoint curves).  Open curves are stitched along the frame.
    A facet owning the whole frame with no frame crossings gets the plain
    frame rectangle as its outer loop.
    """
    loops = []
    chains = []
    for germ in germs:
        closed, pts = _trace_germ(ms, germ)
        if closed:
            loops.append(_dedupe(pts))
        else:
            chains.append(pts)
    walked = 0.0
    if chains:
        stitched, walked = _stitch_frame(ms, chains)
        loops.extend(_dedupe(lp) for lp in stitched)
    if has_frame and walked == 0.0:
        loops.append(frame_rectangle(ms.mesh))
    return loops


def polygon_area(points) -> float:
    """Signed shoelace area, implicit closure, positive counterclockwise in
    the raw (x, y) frame used throughout."""
    s = 0.0
    m = len(points)
    for i in range(m):
        x0, y0 = points[i]
        x1, y1 = points[(i + 1) % m]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


# =============================================================================
# public level-curve query
# =============================================================================


def level_polylines(ms: MiddleSpace, eid: int, value: float):
    """The level curve through the middle-space point (eid, value) as one
    closed polyline, superlevel side on the left.

    The point must lie strictly inside the edge: levels at or outside the
    edge's endpoint values name a vertex of the middle space (or miss the
    edge entirely) and have no single-curve preimage.
    """
    e = ms.edges[eid]
    probe = ms.order.probe_at_value(value)
    if not (ms.rank[e.lo] < probe.rho < ms.rank[e.hi]):
        raise UnsupportedMiddlePointError(
            f"level {value} does not meet the interior of edge {eid}")
    seed = seed_edge(ms, eid, probe.rho)
    closed, tokens = trace_from(ms, seed, probe)
    pts = [crossing_point(ms, t, probe) for t in tokens]
    pts, tokens = _orient(ms, pts, tokens, probe, inside_low=False, closed=closed)
    if closed:
        return [_dedupe(pts)]
    stitched, _ = _stitch_frame(ms, [pts])
    return [_dedupe(lp) for lp in stitched]
