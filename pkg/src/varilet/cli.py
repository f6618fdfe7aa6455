"""Command-line front end for the varilet pipeline.

Every command reads one image (or a .npy array for synthetic fields),
builds the middle space, persistence, lens and transform, and writes its
artifacts next to the requested output stem.  All JSON artifacts carry a
schema_version field and are serialized with sorted keys, so identical
configuration and input produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import VariletError
from .fractal import fractal_regions
from .ingest import LuminanceGrid, build_mesh, load_image
from .lens import Lens
from .middlespace import build_middle_space
from .persistence import Persistence
from .transform import Transform
from .vectorize import emit_svg, facet_index, trace_facets

SCHEMA_VERSION = "1"


def _load(path: str) -> LuminanceGrid:
    p = Path(path)
    if p.suffix == ".npy":
        return LuminanceGrid.from_array(np.load(p))
    return load_image(p)


def _build(grid: LuminanceGrid, policies):
    ms = build_middle_space(build_mesh(grid))
    lens = Lens(Persistence(ms), policies=policies)
    return ms, lens, Transform(lens)


def _json_default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_json(path: Path, payload: dict) -> None:
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    path.write_text(json.dumps(payload, sort_keys=True, indent=2,
                               default=_json_default) + "\n")


def _write_png(path: Path, values: np.ndarray) -> None:
    from PIL import Image

    q = np.clip(np.rint(values), 0, 255).astype(np.uint8)
    Image.fromarray(q, mode="L").save(path)


def _stem(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out / Path(args.image).stem


def _region_row(lens, reg) -> dict:
    return {
        "id": reg.rid,
        "sense": reg.sense,
        "persistence": reg.persistence,
        "boundary_value": None if reg.sense == "root"
        else lens.boundary_value(reg),
        "parent": None if lens.parent[reg.rid] is None
        else lens.parent[reg.rid].rid,
        "depth": lens.depth[reg.rid],
    }


def cmd_segment(args) -> int:
    grid = _load(args.image)
    ms, lens, tr = _build(grid, args.policy)
    facets = trace_facets(ms, lens)
    stem = _stem(args)
    svg = emit_svg(facets, grid, style=args.style,
                   depth_limit=args.depth_limit)
    Path(f"{stem}.segment.svg").write_bytes(svg)
    _write_json(Path(f"{stem}.facets.json"), {
        "facets": facet_index(facets),
        "regions": [_region_row(lens, r) for r in lens.alive_regions()],
        "policy": list(args.policy),
        "style": args.style,
    })
    return 0


def cmd_simplify(args) -> int:
    grid = _load(args.image)
    ms, lens, tr = _build(grid, args.policy)
    anc = tr.anchored_measure(args.measure)
    t = args.thresholds[0] if args.thresholds else 0.0
    keep = tr.threshold_keep(t, anc)
    simp = tr._apply(keep)
    stem = _stem(args)
    _write_png(Path(f"{stem}.simplified.png"), simp.values)
    _write_json(Path(f"{stem}.simplified.json"), {
        "measure": args.measure,
        "threshold": t,
        "kept": sorted(keep),
        "dropped": sorted(set(tr.rids) - keep),
        "extrema": simp.middle().extrema_count(),
    })
    return 0


def cmd_scale_space(args) -> int:
    if not args.thresholds and not args.count:
        raise VariletError("scale-space needs --thresholds or --count")
    grid = _load(args.image)
    ms, lens, tr = _build(grid, args.policy)
    facets = trace_facets(ms, lens)
    if args.thresholds:
        levels = tr.scale_space(thresholds=args.thresholds,
                                measure=args.measure)
    else:
        levels = tr.scale_space(count=args.count, measure=args.measure)
    stem = _stem(args)
    measures = tr.measures(args.measure)
    manifest = {"measure": args.measure, "levels": []}
    for k, lv in enumerate(levels):
        png = Path(f"{stem}.T{k}.png")
        svg = Path(f"{stem}.T{k}.svg")
        _write_png(png, lv.simplified.values)
        svg.write_bytes(emit_svg(facets, grid, style=args.style,
                                 depth_limit=args.depth_limit, keep=lv.keep))
        manifest["levels"].append({
            "index": k,
            "threshold": lv.threshold,
            "surviving": sorted(lv.keep),
            "measures": {str(rid): measures[rid] for rid in sorted(lv.keep)},
            "png": png.name,
            "svg": svg.name,
        })
    _write_json(Path(f"{stem}.scale-space.manifest.json"), manifest)
    return 0


def cmd_fractal(args) -> int:
    grid = _load(args.image)
    ms, lens, tr = _build(grid, args.policy)
    regions = fractal_regions(tr, measure=args.measure, gof=args.gof,
                              consistency=args.consistency)
    stem = _stem(args)
    _write_json(Path(f"{stem}.fractal.json"), {
        "measure": args.measure,
        "gof": args.gof,
        "consistency": args.consistency,
        "regions": [{
            "region": fr.region,
            "alpha": fr.fit.alpha,
            "x_min": fr.fit.x_min,
            "ks_stat": fr.fit.ks_stat,
            "n_tail": fr.fit.n_tail,
            "members": len(fr.members),
        } for fr in regions],
    })
    facets = trace_facets(ms, lens)
    tint = frozenset(fr.region for fr in regions)
    svg = emit_svg(facets, grid, style=args.style,
                   depth_limit=args.depth_limit, tint_regions=tint)
    Path(f"{stem}.fractal.svg").write_bytes(svg)
    return 0


def cmd_stats(args) -> int:
    grid = _load(args.image)
    ms, lens, tr = _build(grid, args.policy)
    facets = trace_facets(ms, lens)
    depths = [lens.depth[r.rid] for r in lens.alive_regions()]
    stem = _stem(args)
    _write_json(Path(f"{stem}.stats.json"), {
        "width": grid.width,
        "height": grid.height,
        "sites": ms.n_sites,
        "ttv": ms.ttv,
        "regions": len(lens.alive_regions()),
        "facets": len(facets),
        "facets_depth1": sum(1 for f in facets if f.depth == 1),
        "max_depth": max(depths),
        "extrema": {kind: len(ms.extrema(kind)) for kind in ("min", "max")},
        "resolutions": len(lens.resolution_log),
        "policy": list(args.policy),
    })
    return 0


def cmd_verify(args) -> int:
    grid = _load(args.image)
    ms, lens, tr = _build(grid, args.policy)
    report = lens.verify(inject_fault=args.inject_fault)
    if args.ttv_additivity:
        rng = np.random.default_rng(args.seed)
        worst = 0.0
        for _ in range(args.ttv_additivity):
            coeffs = {rid: float(rng.normal()) for rid in tr.rids}
            route = tr.combination_ttv(coeffs)
            rebuilt = tr.rebuild_middle(coeffs).ttv
            worst = max(worst, abs(route - rebuilt) / max(1.0, abs(route)))
        report["checks"]["ttv_additivity"] = worst <= 1e-9
        report["ttv_additivity_rel_err"] = worst
        if worst > 1e-9:
            report["ok"] = False
    rec = tr.reconstruct()
    rec_err = float(np.abs(rec - grid.values).max())
    report["checks"]["reconstruction"] = rec_err <= 1e-9
    report["reconstruction_abs_err"] = rec_err
    if rec_err > 1e-9:
        report["ok"] = False
    _write_json(Path(f"{_stem(args)}.verify.json"), report)
    print("ok" if report["ok"] else "FAILED", file=sys.stderr)
    return 0 if report["ok"] else 1


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="varilet",
        description="Hierarchical image segmentation by topological variation.")
    sub = p.add_subparsers(dest="command", required=True)
    commands = {
        "segment": cmd_segment,
        "simplify": cmd_simplify,
        "scale-space": cmd_scale_space,
        "fractal": cmd_fractal,
        "stats": cmd_stats,
        "verify": cmd_verify,
    }
    for name, fn in commands.items():
        q = sub.add_parser(name)
        q.set_defaults(fn=fn)
        q.add_argument("image", help="input image or .npy field")
        q.add_argument("--out", default=".", help="output directory")
        q.add_argument("--policy", default="union,choice,omit",
                       type=lambda s: tuple(s.split(",")),
                       help="conflict policies in priority order")
        q.add_argument("--style", default="gray",
                       choices=("gray", "sampled", "outline"))
        q.add_argument("--depth-limit", type=int, default=None)
        q.add_argument("--measure", default="persistence",
                       choices=("persistence", "ttv", "contrast", "area"))
        q.add_argument("--thresholds", default=None,
                       type=lambda s: [float(v) for v in s.split(",")])
        q.add_argument("--count", type=int, default=None,
                       help="number of scale-space levels")
        q.add_argument("--gof", type=float, default=0.05)
        q.add_argument("--consistency", type=float, default=0.3)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--ttv-additivity", type=int, default=0, metavar="N",
                       help="verify: also check N random combinations")
        q.add_argument("--inject-fault", default=None,
                       choices=("boundary-value", "segment-owner"))
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.thresholds is not None:
        t = args.thresholds
        if any(v < 0 for v in t) or t != sorted(t):
            print("thresholds must be nonnegative ascending", file=sys.stderr)
            return 2
    try:
        return args.fn(args)
    except (VariletError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
