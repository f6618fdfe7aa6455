"""Contour-tree structure, total variation, and level-curve tracing."""

from __future__ import annotations

import numpy as np
import pytest

import fields
import oracles
from varilet.errors import UnsupportedMiddlePointError
from varilet.ingest import LuminanceGrid, build_mesh, evaluate
from varilet.middlespace import build_middle_space
from varilet.tracing import level_polylines

SUITE = [
    ("two_bump", fields.two_bump()),
    ("plus", fields.plus_field()),
    ("hole7", fields.hole7()),
    ("chain7", fields.chain7()),
    ("two_leaf", fields.two_leaf()),
    ("columns", fields.columns_field()),
    ("ramp", fields.ramp()),
]


def _build(f):
    mesh = build_mesh(LuminanceGrid.from_array(f))
    return mesh, build_middle_space(mesh)


def _random_cases():
    for seed in (0, 1, 5, 9):
        yield f"rand-{seed}", fields.random_field(8, 8, seed)
    for seed in (2, 7):
        yield f"tied-{seed}", fields.random_field(10, 10, seed, integer=True)


# ---------------------------------------------------------------------------
# tree structure


def test_vertices_match_census():
    for name, f in SUITE + list(_random_cases()):
        mesh, ms = _build(f)
        mins, maxs, joins, splits = oracles.census(mesh)
        assert set(ms.vertices) == mins | maxs | joins | splits, name
        assert set(ms.extrema("min")) == mins, name
        assert set(ms.extrema("max")) == maxs, name
        assert set(ms.extrema("saddle")) == joins | splits, name


def test_tree_euler_count():
    for name, f in SUITE + list(_random_cases()):
        _, ms = _build(f)
        assert len(ms.edges) == len(ms.vertices) - 1, name


def test_regular_sites_partition_into_chains():
    for name, f in SUITE + list(_random_cases()):
        mesh, ms = _build(f)
        seen = set()
        for e in ms.edges:
            assert ms.is_vertex[e.lo] and ms.is_vertex[e.hi], name
            ranks = [ms.rank[e.lo]] + list(e.chain_ranks) + [ms.rank[e.hi]]
            assert all(a < b for a, b in zip(ranks, ranks[1:])), name
            for pos, s in enumerate(e.chain):
                assert ms.site_edge[s] == e.id and ms.site_edge_pos[s] == pos
                seen.add(s)
        regular = {s for s in range(mesh.n_sites) if not ms.is_vertex[s]}
        assert seen == regular, name


def test_vertex_edge_stars_consistent():
    for name, f in SUITE:
        _, ms = _build(f)
        for v in ms.vertices:
            for eid in ms.vertex_up_edges[v]:
                assert ms.edges[eid].lo == v, name
            for eid in ms.vertex_down_edges[v]:
                assert ms.edges[eid].hi == v, name
            if ms.vertex_kind[v] == "max":
                assert not ms.vertex_up_edges[v], name
            if ms.vertex_kind[v] == "min":
                assert not ms.vertex_down_edges[v], name


def test_monotone_field_contracts_to_one_edge():
    _, ms = _build(fields.ramp())
    assert len(ms.vertices) == 2
    assert len(ms.edges) == 1
    assert ms.ttv == 255.0


def test_two_bump_shape():
    _, ms = _build(fields.two_bump())
    assert len(ms.vertices) == 4 and len(ms.edges) == 3
    kinds = sorted(ms.vertex_kind.values())
    assert kinds == ["max", "max", "min", "saddle"]


# ---------------------------------------------------------------------------
# anchors


def test_peak_anchors_at_its_sample():
    _, ms = _build(fields.two_bump())
    assert ms.anchor(6) == (1.0, 1.0)
    assert ms.anchor(18) == (3.0, 3.0)


def test_split_saddle_anchors_at_interior_point():
    _, ms = _build(np.array([[0.0, 1.0], [1.0, 0.0]]))
    saddle = ms.extrema("saddle")
    assert [ms.anchor(v) for v in saddle] == [(0.5, 0.5)]


def test_plateau_vertices_anchor_at_first_tied_sample():
    # The 9-plateau ring of hole7 hosts several vertices; all anchor at
    # the scan-order first tied sample (3, 2).
    _, ms = _build(fields.hole7())
    plateau = [v for v in ms.vertices if ms.real[v] == 9.0]
    assert plateau and all(ms.anchor(v) == (3.0, 2.0) for v in plateau)


# ---------------------------------------------------------------------------
# total variation


def test_ttv_matches_oracle():
    for name, f in SUITE + list(_random_cases()):
        mesh, ms = _build(f)
        want = oracles.ttv_oracle(mesh)
        assert abs(ms.ttv - want) < 1e-9 * max(1.0, want), name


def test_ttv_shift_invariant():
    f = fields.random_field(7, 7, 13)
    _, ms = _build(f)
    _, shifted = _build(f + 17.5)
    assert abs(ms.ttv - shifted.ttv) < 1e-9


def test_ttv_scales_linearly():
    f = fields.random_field(7, 7, 14)
    _, ms = _build(f)
    _, doubled = _build(2.0 * f)
    assert abs(doubled.ttv - 2.0 * ms.ttv) < 1e-9


# ---------------------------------------------------------------------------
# level curves


def test_bump_half_height_is_one_loop_around_peak():
    _, ms = _build(fields.two_bump())
    eid = next(e.id for e in ms.edges if e.hi == 18)
    loops = level_polylines(ms, eid, 20.0)
    assert len(loops) == 1
    loop = loops[0]
    assert len(loop) >= 4 and loop[0] != loop[-1]
    assert oracles.point_in_polygon(3.0, 3.0, loop)
    assert not oracles.point_in_polygon(1.0, 1.0, loop)
    for x, y in loop:
        assert abs(evaluate(ms.mesh, x, y) - 20.0) < 1e-9


def test_open_curve_closes_along_frame():
    _, ms = _build(fields.ramp())
    loops = level_polylines(ms, 0, 100.0)
    assert len(loops) == 1
    loop = loops[0]
    corners = {(0.0, 0.0), (5.0, 0.0), (5.0, 3.0), (0.0, 3.0)}
    inserted = [p for p in loop if p in corners]
    assert len(inserted) == 2
    for x, y in loop:
        if (x, y) in corners:
            continue
        assert abs(evaluate(ms.mesh, x, y) - 100.0) < 1e-9
    # superlevel side is enclosed
    assert oracles.point_in_polygon(4.0, 1.5, loop)
    assert not oracles.point_in_polygon(0.5, 1.5, loop)


def test_level_at_vertex_value_rejected():
    _, ms = _build(fields.two_bump())
    eid = next(e.id for e in ms.edges if e.hi == 18)
    with pytest.raises(UnsupportedMiddlePointError):
        level_polylines(ms, eid, 40.0)
    with pytest.raises(UnsupportedMiddlePointError):
        level_polylines(ms, eid, -1.0)


def test_curve_count_matches_level_components():
    rng = np.random.default_rng(40)
    for name, f in [("rand-0", fields.random_field(8, 8, 0)),
                    ("rand-9", fields.random_field(8, 8, 9)),
                    ("hole7", fields.hole7())]:
        mesh, ms = _build(f)
        vals = np.unique(mesh.site_values)
        for _ in range(15):
            a, b = np.sort(rng.choice(vals, size=2, replace=False))
            v = float(rng.uniform(a, b))
            if min(abs(v - x) for x in vals) < 1e-6:
                continue
            straddling = [e.id for e in ms.edges
                          if ms.real[e.lo] < v < ms.real[e.hi]]
            assert len(straddling) == oracles.level_component_count(mesh, v), name
            for eid in straddling:
                for loop in level_polylines(ms, eid, v):
                    for x, y in loop:
                        if (x, y) in {(0.0, 0.0), (float(ms.mesh.width - 1), 0.0),
                                      (float(ms.mesh.width - 1), float(ms.mesh.height - 1)),
                                      (0.0, float(ms.mesh.height - 1))}:
                            continue
                        assert abs(evaluate(mesh, x, y) - v) < 1e-9, name
