"""Power-law structure of region size distributions.

Each region of a lens carries the multiset of its descendants' sizes
under some measure.  Where that distribution follows a power law with a
consistent exponent across the hierarchy, the region behaves like a
fractal: its parts repeat its own statistics at smaller scales.  Fitting
uses the continuous maximum-likelihood estimator with the lower cutoff
chosen to minimize the Kolmogorov-Smirnov distance over the tail; the
goodness-of-fit bootstrap of the usual procedure is replaced by a plain
distance threshold, which keeps repeated per-region fits cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError


@dataclass
class PowerLawFit:
    alpha: float
    x_min: float
    ks_stat: float
    n_tail: int


@dataclass
class FractalRegion:
    region: int
    fit: PowerLawFit
    members: list[int]


def power_law_samples(n: int, alpha: float, x_min: float = 1.0,
                      seed: int = 0) -> np.ndarray:
    """Inverse-CDF sampling of a continuous power law."""
    u = np.random.default_rng(seed).random(n)
    return x_min * u ** (-1.0 / (alpha - 1.0))


def fit_power_law(samples, min_tail: int = 50,
                  max_candidates: int = 200) -> PowerLawFit:
    """Continuous MLE with KS-selected lower cutoff.

    Candidate cutoffs are the observed values; above `max_candidates`
    distinct values the scan thins to an evenly spaced subset, which
    keeps large fits near-linear without moving the optimum much.
    """
    xs = np.sort(np.asarray([float(v) for v in samples if v > 0.0]))
    n = xs.shape[0]
    if n < min_tail:
        raise InsufficientDataError(
            f"{n} positive samples, need at least {min_tail}")
    logs = np.log(xs)
    suffix = np.cumsum(logs[::-1])[::-1]
    cand = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    cand = cand[cand <= n - min_tail]
    if cand.shape[0] > max_candidates:
        pick = np.linspace(0, cand.shape[0] - 1, max_candidates)
        cand = cand[np.unique(np.rint(pick).astype(np.int64))]
    best = None
    for i in cand:
        m = n - i
        denom = float(suffix[i]) - m * float(logs[i])
        if denom <= 0.0:
            continue
        alpha = 1.0 + m / denom
        model = 1.0 - (xs[i:] / xs[i]) ** (1.0 - alpha)
        steps = np.arange(m, dtype=np.float64)
        d = max(float(np.abs((steps + 1.0) / m - model).max()),
                float(np.abs(steps / m - model).max()))
        if best is None or d < best[0]:
            best = (d, alpha, float(xs[i]), m)
    if best is None:
        raise InsufficientDataError("samples have no spread above any cutoff")
    d, alpha, x_min, m = best
    return PowerLawFit(float(alpha), x_min, float(d), int(m))


def fractal_regions(transform, measure: str = "ttv", gof: float = 0.05,
                    consistency: float = 0.3,
                    min_tail: int = 50) -> list[FractalRegion]:
    """Maximal regions whose descendant sizes fit one power law.

    A region qualifies when its descendants' measures fit with KS
    distance at or below `gof`.  Qualifying regions are absorbed upward
    while the parent also qualifies and the exponents agree within
    `consistency`; what remains is reported.
    """
    lens = transform.lens
    sizes = transform.measures(measure)
    root = lens.root.rid

    order = sorted(lens.children, key=lambda rid: lens.depth[rid],
                   reverse=True)
    subtree: dict[int, list[int]] = {}
    for rid in order:
        acc = [rid]
        for c in lens.children[rid]:
            acc.extend(subtree[c.rid])
        subtree[rid] = acc

    fits: dict[int, PowerLawFit] = {}
    for rid in subtree:
        desc = [sizes[r] for r in subtree[rid] if r != rid]
        try:
            fits[rid] = fit_power_law(desc, min_tail=min_tail)
        except InsufficientDataError:
            continue

    def qualifies(rid: int) -> bool:
        return rid in fits and fits[rid].ks_stat <= gof

    out = []
    for rid in sorted(fits):
        if not qualifies(rid):
            continue
        p = lens.parent[rid]
        if p is not None and qualifies(p.rid) \
                and abs(fits[p.rid].alpha - fits[rid].alpha) <= consistency:
            continue
        out.append(FractalRegion(rid, fits[rid], sorted(subtree[rid])))
    return out
