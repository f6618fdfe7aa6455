"""Image loading and the piecewise-monotone interpolation mesh.

A grayscale image is read as a grid of luminance samples.  Between samples
the surface is interpolated bilinearly per unit cell.  A cell whose bilinear
patch has a saddle strictly inside the open cell is split into four
triangles around the saddle point, and the surface is barycentric-linear on
each triangle; every face of the resulting mesh is then monotone (no
interior critical point), which is what the sweep algorithms downstream
rely on.

With the (value, site index) perturbation of levels.py the split test
reduces to four sign comparisons on corner pairs.  For tie-free cells it is
exactly the analytic condition "stationary point of the bilinear patch in
the open cell": writing f = f00 + A*x + B*y + C*x*y, the stationary point
is (x*, y*) = (-B/C, -A/C) and

    sign(B) != sign(B + C)  <=>  x* in (0, 1)
    sign(A) != sign(A + C)  <=>  y* in (0, 1)

where A + C = f11 - f01 and B + C = f11 - f10.  Tied corners follow the
perturbed signs; the stored saddle coordinates are the limits as the
perturbation goes to zero and may then land on the closed cell's border.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Rec.601 luma weights used to reduce color input to luminance.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class LuminanceGrid:
    """Luminance samples on an integer grid, row-major, y down."""

    values: np.ndarray                # float64, shape (H, W)
    rgb: np.ndarray | None = None     # uint8, shape (H, W, 3) when loaded from color

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @staticmethod
    def from_array(values) -> "LuminanceGrid":
        a = np.asarray(values, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("luminance grid must be 2-D")
        return LuminanceGrid(values=a)


def load_image(path: str | Path) -> LuminanceGrid:
    """Read an image file; color inputs are reduced by Rec.601 luma."""
    from PIL import Image

    with Image.open(path) as im:
        if im.mode == "L":
            return LuminanceGrid(values=np.asarray(im, dtype=np.float64))
        rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    r, g, b = LUMA_WEIGHTS
    values = r * rgb[:, :, 0] + g * rgb[:, :, 1] + b * rgb[:, :, 2]
    return LuminanceGrid(values=values.astype(np.float64), rgb=rgb)


@dataclass
class PatchMesh:
    """Sites, faces and adjacency of the piecewise-monotone interpolant.

    Sites are the H*W luminance samples (row-major index y*W + x) followed by
    one site per split cell, ordered by ascending cell index cy*(W-1) + cx.
    Mesh edges are the grid edges plus four spokes per split cell.
    """

    grid: LuminanceGrid
    height: int
    width: int
    n_samples: int
    site_values: np.ndarray       # (n_sites,) sample values then saddle values
    cell_saddle: np.ndarray       # (n_cells,) ordinal of the cell's saddle, -1 if none
    saddle_cell: np.ndarray       # (n_saddles,) cell index per saddle ordinal
    saddle_pos: np.ndarray        # (n_saddles, 2) global (x, y) of each saddle
    edges_u: np.ndarray           # (n_edges,) mesh edges, unordered site pairs
    edges_v: np.ndarray
    indptr: np.ndarray            # CSR adjacency over sites
    indices: np.ndarray
    _positions: np.ndarray = field(default=None, repr=False)

    @property
    def n_sites(self) -> int:
        return self.site_values.shape[0]

    @property
    def n_saddles(self) -> int:
        return self.saddle_cell.shape[0]

    def saddle_site(self, ordinal: int) -> int:
        return self.n_samples + ordinal

    def site_positions(self) -> np.ndarray:
        """(n_sites, 2) array of (x, y) image positions."""
        if self._positions is None:
            n, w = self.n_samples, self.width
            pos = np.empty((self.n_sites, 2), dtype=np.float64)
            idx = np.arange(n)
            pos[:n, 0] = idx % w
            pos[:n, 1] = idx // w
            pos[n:] = self.saddle_pos
            self._positions = pos
        return self._positions

    def site_position(self, site: int) -> tuple[float, float]:
        p = self.site_positions()[site]
        return float(p[0]), float(p[1])

    def neighbors(self, site: int) -> np.ndarray:
        return self.indices[self.indptr[site]:self.indptr[site + 1]]

    def cell_corners(self, cell: int) -> tuple[int, int, int, int]:
        """Sample sites (c00, c10, c01, c11) of a cell index."""
        w = self.width
        cy, cx = divmod(cell, w - 1)
        c00 = cy * w + cx
        return c00, c00 + 1, c00 + w, c00 + w + 1


def build_mesh(grid: LuminanceGrid) -> PatchMesh:
    """Classify cells, place saddles, and assemble the site adjacency."""
    f = grid.values
    h, w = f.shape
    if h < 2 or w < 2:
        raise ValueError("grid must be at least 2x2")
    n = h * w

    f00 = f[:-1, :-1]
    f10 = f[:-1, 1:]
    f01 = f[1:, :-1]
    f11 = f[1:, 1:]
    # Perturbed sign of each corner difference; the higher-index corner wins
    # ties, so >= encodes "perturbed above" exactly.
    a = f10 >= f00
    b = f11 >= f01
    c = f01 >= f00
    d = f11 >= f10
    split = (a != b) & (c != d)

    cy, cx = np.nonzero(split)
    s00 = f00[cy, cx]
    A = f10[cy, cx] - s00
    B = f01[cy, cx] - s00
    C = s00 + f11[cy, cx] - f10[cy, cx] - f01[cy, cx]
    if np.any(C == 0.0):
        raise AssertionError("split cell with degenerate bilinear coefficient")
    sx = -B / C
    sy = -A / C
    sval = s00 - A * B / C
    k = cx.shape[0]

    cell_saddle = np.full((h - 1) * (w - 1), -1, dtype=np.int64)
    cell_index = cy * (w - 1) + cx
    cell_saddle[cell_index] = np.arange(k)
    saddle_pos = np.column_stack([cx + sx, cy + sy]) if k else np.empty((0, 2))

    site_values = np.concatenate([f.ravel(), sval])

    idx = np.arange(n).reshape(h, w)
    eu = [idx[:, :-1].ravel(), idx[:-1, :].ravel()]
    ev = [idx[:, 1:].ravel(), idx[1:, :].ravel()]
    if k:
        corners = np.stack([
            idx[cy, cx], idx[cy, cx + 1], idx[cy + 1, cx], idx[cy + 1, cx + 1],
        ])
        saddle_sites = n + np.arange(k)
        eu.append(np.repeat(saddle_sites, 4))
        ev.append(corners.T.ravel())
    edges_u = np.concatenate(eu).astype(np.int64)
    edges_v = np.concatenate(ev).astype(np.int64)

    n_sites = n + k
    both_u = np.concatenate([edges_u, edges_v])
    both_v = np.concatenate([edges_v, edges_u])
    counts = np.bincount(both_u, minlength=n_sites)
    indptr = np.zeros(n_sites + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    order = np.argsort(both_u, kind="stable")
    indices = both_v[order]

    return PatchMesh(
        grid=grid, height=h, width=w, n_samples=n,
        site_values=site_values, cell_saddle=cell_saddle,
        saddle_cell=cell_index.astype(np.int64), saddle_pos=saddle_pos,
        edges_u=edges_u, edges_v=edges_v, indptr=indptr, indices=indices,
    )


# Corner ring of a unit cell, counterclockwise in (x, y) coordinates.
_RING = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))


def _cell_of_point(mesh: PatchMesh, x: float, y: float) -> tuple[int, int]:
    if not (0.0 <= x <= mesh.width - 1 and 0.0 <= y <= mesh.height - 1):
        raise ValueError(f"point ({x}, {y}) outside the image domain")
    cx = min(int(np.floor(x)), mesh.width - 2)
    cy = min(int(np.floor(y)), mesh.height - 2)
    return cx, cy


def evaluate(mesh: PatchMesh, x: float, y: float) -> float:
    """Surface value at an image point.

    Bilinear inside plain cells; barycentric-linear on each of the four
    (corner, corner, saddle) triangles of a split cell.  The two readings
    agree on all cell borders and spokes, so the surface is continuous.
    """
    cx, cy = _cell_of_point(mesh, x, y)
    f = mesh.grid.values
    u = x - cx
    v = y - cy
    g00 = f[cy, cx]
    g10 = f[cy, cx + 1]
    g01 = f[cy + 1, cx]
    g11 = f[cy + 1, cx + 1]
    k = mesh.cell_saddle[cy * (mesh.width - 1) + cx]
    if k < 0:
        return float(g00 * (1 - u) * (1 - v) + g10 * u * (1 - v)
                     + g01 * (1 - u) * v + g11 * u * v)

    spx, spy = mesh.saddle_pos[k]
    sx, sy = spx - cx, spy - cy
    sv = mesh.site_values[mesh.n_samples + k]
    ring_vals = (g00, g10, g11, g01)

    # The triangle fan covers the cell; pick the triangle whose barycentric
    # coordinates are least negative, which is robust at shared borders and
    # when the saddle degenerates onto a cell edge.
    best = None
    for i in range(4):
        ax, ay = _RING[i]
        bx, by = _RING[(i + 1) % 4]
        det = (bx - ax) * (sy - ay) - (by - ay) * (sx - ax)
        if det == 0.0:
            continue
        wa = ((bx - u) * (sy - v) - (by - v) * (sx - u)) / det
        wb = ((sx - u) * (ay - v) - (sy - v) * (ax - u)) / det
        wc = 1.0 - wa - wb
        low = min(wa, wb, wc)
        if best is None or low > best[0]:
            best = (low, wa * ring_vals[i] + wb * ring_vals[(i + 1) % 4] + wc * sv)
    assert best is not None
    return float(best[1])
