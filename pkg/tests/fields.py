"""Synthetic luminance fields shared across the test suite.

Each constructor returns a plain float array.  Structural facts quoted in
the tests (region counts, persistences, boundary values, areas) were
derived once from the brute-force oracles in oracles.py and then frozen.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np


def berkeley_path() -> str | None:
    """Path to BSDS500 photograph 385028 when available, else None.

    Checked from the VARILET_BSDS_385028 environment variable first, then
    assets/385028.jpg next to the package sources.
    """
    cand = os.environ.get("VARILET_BSDS_385028")
    if cand and Path(cand).is_file():
        return cand
    local = Path(__file__).resolve().parent.parent / "assets" / "385028.jpg"
    return str(local) if local.is_file() else None


def two_bump(a: float = 100.0, b: float = 40.0) -> np.ndarray:
    """5x5 background 0 with spikes a and b on the diagonal.

    With (100, 40): the 40-spike merges into the background at level 0,
    so its region has boundary value 0 and persistence 40; the 100-spike
    and the background are global and stay in the root.
    """
    f = np.zeros((5, 5))
    f[1, 1] = a
    f[3, 3] = b
    return f


def plus_field() -> np.ndarray:
    """3x3 with four tied 9-corners; exercises perturbed tie-breaks."""
    return np.array([[9.0, 5.0, 9.0],
                     [1.0, 3.0, 2.0],
                     [9.0, 6.0, 9.0]])


def hole7() -> np.ndarray:
    """7x7 crater: a 9-ring with a 5-pit inside, corner dropped to -4.

    Yields root + one min region (the pit), whose single facet is an
    annulus complement: the facet has two boundary loops.
    """
    f = np.zeros((7, 7))
    f[1:6, 1:6] = 3.0
    f[2:5, 2:5] = 9.0
    f[3, 3] = 5.0
    f[0, 0] = -4.0
    f[2, 2] = 9.5
    return f


def chain7() -> np.ndarray:
    """7x7 volcano with an island: path hierarchy root > floor > island.

    The rim carries a strictly increasing ramp in exact sixteenths so the
    ring has a unique maximum (no plateau artifacts); the crater floor is
    a 4-plateau holding an 8-island.  Persistences: root 9.4375, floor
    between 4.5 and 4.6 (dies at a rim-flank saddle), island exactly 4.
    """
    f = np.zeros((7, 7))
    f[1:6, 1:6] = 8.5
    f[2:5, 2:5] = 4.0
    f[3, 3] = 8.0
    ring = [(1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (2, 5), (3, 5), (4, 5),
            (5, 5), (5, 4), (5, 3), (5, 2), (5, 1), (4, 1), (3, 1), (2, 1)]
    for k, (r, c) in enumerate(ring):
        f[r, c] = 8.5 + k / 16.0
    return f


def two_leaf() -> np.ndarray:
    """3x7 with three spikes 3, 5, 9 over a connected 0 background.

    The 9-spike is global; the 3- and 5-spikes become sibling max regions
    (persistences 3 and 5) directly under the root.
    """
    f = np.zeros((3, 7))
    f[1] = [0.0, 3.0, 0.0, 5.0, 0.0, 9.0, 0.0]
    return f


def columns_field() -> np.ndarray:
    """2x6 with axis-aligned level sets; engineered for an exact area.

    Column values [0, 40, 10, 20, 25, 30]: the max region grown from the
    25..30 ridge is bounded by the level-10 line, whose pullback is the
    rectangle [2, 5] x [0, 1] of area exactly 3.0.
    """
    return np.array([[0.0, 40.0, 10.0, 20.0, 25.0, 30.0],
                     [0.0, 40.0, 10.0, 20.0, 25.0, 30.0]])


def ramp(width: int = 6, height: int = 4, top: float = 255.0) -> np.ndarray:
    """Strictly monotone gradient from 0 to top; middle space is one edge."""
    cols = np.linspace(0.0, top, width)
    return np.tile(cols, (height, 1))


def random_field(width: int, height: int, seed: int,
                 integer: bool = False) -> np.ndarray:
    """Uniform random field in [0, 255]; integer variant has many ties."""
    rng = np.random.default_rng(seed)
    if integer:
        return rng.integers(0, 256, size=(height, width)).astype(np.float64)
    return rng.uniform(0.0, 255.0, size=(height, width))


def spike_farm(heights: np.ndarray) -> np.ndarray:
    """Isolated unit spikes on a gently tilted background, one per height.

    Spikes sit on odd (row, col) positions two apart, so each becomes its
    own max region with persistence close to its height (the tallest
    survives into the root).  The background rises from 0 to 0.05 across
    the grid; on a flat background every spike would die into the same
    plateau through one giant multi-saddle, and the conflict resolution
    would union most of the regions away.  Heights must stay above 0.05.
    """
    heights = np.asarray(heights, dtype=np.float64)
    if heights.min() <= 0.05:
        raise ValueError("spike heights must exceed the background tilt")
    k = heights.shape[0]
    side = int(np.ceil(np.sqrt(k)))
    n = 2 * side + 1
    f = np.linspace(0.0, 0.05, n * n).reshape(n, n)
    for i, hv in enumerate(heights):
        r, c = divmod(i, side)
        f[2 * r + 1, 2 * c + 1] = hv
    return f


def terraced_farm(heights: np.ndarray) -> np.ndarray:
    """A spike farm raised onto a plate 50 above the surrounding ground.

    The ground holds one giant spike (the global max), so the plate's
    class collects every plate spike as a descendant before dying into
    the root: a two-level hierarchy for subtree statistics.
    """
    heights = np.asarray(heights, dtype=np.float64)
    if heights.min() <= 0.05:
        raise ValueError("spike heights must exceed the background tilt")
    k = heights.shape[0]
    side = int(np.ceil(np.sqrt(k)))
    n = 2 * side + 1
    f = np.linspace(0.0, 0.05, n * (n + 4)).reshape(n, n + 4)
    f[1, 1] = 80.0
    f[:, 4:] += 50.0
    for i, hv in enumerate(heights):
        r, c = divmod(i, side)
        f[2 * r + 1, 4 + 2 * c + 1] = 50.0 + hv
    return f
