"""Image-plane realization of lens facets as closed polylines and SVG.

Each facet's boundary cuts trace to level curves in the image; open
chains close along the frame.  A facet becomes one SVG path of closed
polylines under the even-odd fill rule, so holes render correctly, and
the document draws root first and leaves last: the painter's algorithm
realizes the hierarchy.  The root facet itself stays unfilled, which is
what exposes the checkered background over points not contained in any
other facet.

Polylines are kept at full precision here; serialization rounds to three
decimals.  Tests that re-evaluate boundary vertices against the image
use the traced coordinates, since rounding trades exactness for file
size on purpose.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .tracing import facet_boundary, polygon_area


@dataclass
class TracedFacet:
    region: int
    depth: int
    level: float | None
    boundaries: list[list[tuple[float, float]]]
    pos: int


def _dedupe_consecutive(points):
    out = [points[0]]
    for p in points[1:]:
        if p != out[-1]:
            out.append(p)
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


def _simple_loops(points):
    """Split a closed polyline at repeated vertices into simple loops.

    Boundary curves of glued facets pass through pinch vertices more than
    once; the split changes no fills (the even-odd parity of every point
    off the curve is preserved) and drops only zero-area slivers.
    """
    points = _dedupe_consecutive(points)
    stack = [points]
    out = []
    while stack:
        pts = stack.pop()
        seen: dict = {}
        cut = None
        for i, p in enumerate(pts):
            j = seen.get(p)
            if j is not None:
                cut = (j, i)
                break
            seen[p] = i
        if cut is None:
            if len(pts) >= 3 and polygon_area(pts) != 0.0:
                out.append(pts)
            continue
        j, i = cut
        stack.append(pts[j:i])
        stack.append(pts[:j] + pts[i:])
    return out


def trace_facets(ms, lens) -> list[TracedFacet]:
    """All facets' boundary polylines, in draw order.

    Honors VARILET_THREADS for per-facet tracing; results are reassembled
    in order, so the output is identical at any thread count.
    """
    facets = lens.facets()

    def trace(f):
        loops = []
        for lp in facet_boundary(ms, f.germs, f.has_frame):
            loops.extend(_simple_loops(lp))
        level = None if f.region.sense == "root" \
            else lens.boundary_value(f.region)
        return f.region.rid, lens.depth[f.region.rid], level, loops

    threads = int(os.environ.get("VARILET_THREADS", "1"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(trace, facets))
    else:
        rows = [trace(f) for f in facets]
    return [TracedFacet(rid, depth, level, loops, pos)
            for pos, (rid, depth, level, loops) in enumerate(rows)]


def facet_index(facets) -> list[dict]:
    out = []
    for f in facets:
        xs = [p[0] for lp in f.boundaries for p in lp]
        ys = [p[1] for lp in f.boundaries for p in lp]
        bbox = [min(xs), min(ys), max(xs), max(ys)] if xs else None
        out.append({"id": f.pos, "region": f.region, "depth": f.depth,
                    "level": f.level, "bbox": bbox,
                    "boundaries": len(f.boundaries)})
    return out


def _inside_mask(loops, width: int, height: int) -> np.ndarray:
    """Even-odd membership of integer pixel centers, vectorized per edge."""
    px, py = np.meshgrid(np.arange(width, dtype=np.float64),
                         np.arange(height, dtype=np.float64))
    inside = np.zeros((height, width), dtype=bool)
    for lp in loops:
        m = len(lp)
        for i in range(m):
            x0, y0 = lp[i]
            x1, y1 = lp[(i + 1) % m]
            if y0 == y1:
                continue
            crosses = (y0 > py) != (y1 > py)
            with np.errstate(invalid="ignore"):
                xc = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
            inside ^= crosses & (px < xc)
    return inside


def _gray_fill(level: float) -> str:
    g = max(0.0, min(100.0, level / 255.0 * 100.0))
    return f"rgb({g:.3f}%,{g:.3f}%,{g:.3f}%)"


def _path_d(boundaries) -> str:
    parts = []
    for lp in boundaries:
        coords = " L ".join(f"{x:.3f},{y:.3f}" for x, y in lp)
        parts.append(f"M {coords} Z")
    return " ".join(parts)


def emit_svg(facets, grid, style: str = "gray",
             depth_limit: int | None = None,
             keep=None, tint_regions=frozenset()) -> bytes:
    """SVG document for traced facets.

    `keep` restricts to a region-id set (a simplification renders as a
    truncation of the full draw list: surviving path elements are
    byte-identical); `depth_limit` cuts the hierarchy at a depth.
    `tint_regions` overlays translucent markers on the named regions.
    """
    if style not in ("gray", "sampled", "outline"):
        raise ValueError(f"unknown style {style!r}")
    w = grid.values.shape[1] - 1
    h = grid.values.shape[0] - 1
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        '<defs><pattern id="checker" width="2" height="2" '
        'patternUnits="userSpaceOnUse">'
        '<rect width="2" height="2" fill="#ffffff"/>'
        '<rect width="1" height="1" fill="#cccccc"/>'
        '<rect x="1" y="1" width="1" height="1" fill="#cccccc"/>'
        '</pattern></defs>',
        f'<rect width="{w}" height="{h}" fill="url(#checker)"/>',
    ]
    chosen = [f for f in facets
              if (depth_limit is None or f.depth <= depth_limit)
              and (keep is None or f.region in keep)]
    for f in chosen:
        d = _path_d(f.boundaries)
        if not d:
            continue
        if style == "outline":
            fill = 'fill="none" stroke="#000000" stroke-width="0.08"'
        elif f.level is None:
            fill = 'fill="none"'
        elif style == "gray":
            fill = f'fill="{_gray_fill(f.level)}"'
        else:
            mask = _inside_mask(f.boundaries, grid.values.shape[1],
                                grid.values.shape[0])
            if grid.rgb is not None and mask.any():
                med = np.median(grid.rgb[mask], axis=0)
                r, gn, b = (int(round(float(c))) for c in med)
                fill = f'fill="rgb({r},{gn},{b})"'
            else:
                vals = grid.values[mask]
                lum = float(np.median(vals)) if vals.size else float(f.level)
                fill = f'fill="{_gray_fill(lum)}"'
        lines.append(f'<path data-region="{f.region}" data-depth="{f.depth}" '
                     f'fill-rule="evenodd" {fill} d="{d}"/>')
    for f in chosen:
        if f.region in tint_regions and f.level is not None:
            d = _path_d(f.boundaries)
            if d:
                lines.append(f'<path data-tint="{f.region}" '
                             'fill-rule="evenodd" fill="#ff0044" '
                             f'fill-opacity="0.35" d="{d}"/>')
    lines.append('</svg>')
    return "\n".join(lines).encode("utf-8")
