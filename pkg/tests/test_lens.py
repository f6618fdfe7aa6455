"""Conflict resolution, region ownership, and structural verification."""

from __future__ import annotations

import pytest

import fields
from varilet.errors import LensInvalidError
from varilet.ingest import LuminanceGrid, build_mesh
from varilet.lens import Lens
from varilet.middlespace import build_middle_space
from varilet.persistence import Persistence


def _lens(f, policies=("union", "choice", "omit")):
    ms = build_middle_space(build_mesh(LuminanceGrid.from_array(f)))
    return Lens(Persistence(ms), policies=policies)


def _cases():
    yield "two_bump", fields.two_bump()
    yield "plus", fields.plus_field()
    yield "hole7", fields.hole7()
    yield "chain7", fields.chain7()
    yield "two_leaf", fields.two_leaf()
    for seed in (0, 1, 5, 9):
        yield f"rand-{seed}", fields.random_field(8, 8, seed)
    for seed in (2, 7):
        yield f"tied-{seed}", fields.random_field(10, 10, seed, integer=True)


# ---------------------------------------------------------------------------
# conflict resolution


def test_disjoint_regions_need_no_resolution():
    for f in (fields.two_bump(), fields.hole7(), fields.chain7(),
              fields.two_leaf()):
        assert _lens(f).resolution_log == []


def test_cross_sense_overlap_resolved_by_union():
    # The plus field's deepest min and max regions share their bounding
    # level, so the union policy merges them into one region.
    lens = _lens(fields.plus_field())
    assert lens.resolution_log == [
        {"policy": "union", "pair": [4, 3], "kept": 5}]
    union = lens.regions[5]
    assert lens.alive(union) and union.sense == "union"
    assert {p.rid for p in union.pieces} == {3, 4}
    assert {p.sense for p in union.pieces} == {"min", "max"}
    assert lens.boundary_value(union) == lens.boundary_value(lens.regions[3])
    assert not lens.alive(lens.regions[3])
    assert not lens.alive(lens.regions[4])
    assert lens.verify()["ok"]


def test_choice_policy_keeps_more_persistent_side():
    lens = _lens(fields.plus_field(), policies=("choice",))
    assert len(lens.resolution_log) == 1
    step = lens.resolution_log[0]
    assert step["policy"] == "choice"
    kept = lens.regions[step["kept"]]
    lost = lens.regions[[r for r in step["pair"] if r != step["kept"]][0]]
    assert lens.alive(kept) and not lens.alive(lost)
    assert kept.persistence >= lost.persistence
    assert lens.verify()["ok"]


def test_omit_policy_drops_both_sides():
    lens = _lens(fields.plus_field(), policies=("omit",))
    step = lens.resolution_log[0]
    assert step["policy"] == "omit" and step["kept"] is None
    for rid in step["pair"]:
        assert not lens.alive(lens.regions[rid])
    assert lens.verify()["ok"]


def test_conflict_without_policy_raises():
    with pytest.raises(LensInvalidError):
        _lens(fields.plus_field(), policies=())


def test_unknown_policy_rejected():
    with pytest.raises(ValueError):
        _lens(fields.two_bump(), policies=("union", "vote"))


def test_resolution_is_deterministic():
    f = fields.random_field(8, 8, 1)
    a, b = _lens(f), _lens(f)
    assert a.resolution_log == b.resolution_log
    assert [r.rid for r in a.alive_regions()] == [r.rid for r in b.alive_regions()]
    assert a.edge_bounds == b.edge_bounds
    assert {e: [o.rid for o in owners] for e, owners in a.edge_owners.items()} \
        == {e: [o.rid for o in owners] for e, owners in b.edge_owners.items()}


# ---------------------------------------------------------------------------
# ownership structure


def test_own_segments_partition_total_variation():
    for name, f in _cases():
        lens = _lens(f)
        total = sum(seg[3] for segs in lens.own_segments.values()
                    for seg in segs)
        assert abs(total - lens.ms.ttv) < 1e-9 * max(1.0, lens.ms.ttv), name


def test_forest_reaches_root():
    for name, f in _cases():
        lens = _lens(f)
        for reg in lens.alive_regions():
            chain = lens.owner_chain(reg)
            assert chain[-1] is lens.root, name
            depths = [lens.depth[r.rid] for r in chain]
            assert depths == sorted(depths, reverse=True), name
            assert lens.depth[lens.root.rid] == 0


def test_owner_of_site_is_deepest_holder():
    for name, f in [("plus", fields.plus_field()),
                    ("rand-5", fields.random_field(8, 8, 5))]:
        lens = _lens(f)
        for s in range(lens.ms.n_sites):
            owner = lens.owner_of_site(s)
            assert lens.alive(owner), name
            if owner.sense != "root":
                assert lens.interior_site(owner, s), name
            for child in lens.children[owner.rid]:
                assert not lens.interior_site(child, s), name


def test_elementary_boundary_values():
    lens = _lens(fields.two_bump())
    reg = lens.regions[1]
    assert lens.boundary_value(reg) == lens.ms.real[reg.vertex] == 0.0


# ---------------------------------------------------------------------------
# verification report


def test_verify_clean_on_all_fields():
    for name, f in _cases():
        rep = _lens(f).verify()
        assert rep["ok"], (name, rep["failures"])
        assert set(rep["checks"]) == {"partition", "laminar", "closed",
                                      "dominated", "certificates",
                                      "boundary_values"}
        assert all(rep["checks"].values()), name
        assert rep["failures"] == []


def test_injected_faults_are_detected_and_restored():
    for fault in ("boundary-value", "segment-owner"):
        lens = _lens(fields.random_field(8, 8, 0))
        rep = lens.verify(inject_fault=fault)
        assert not rep["ok"], fault
        assert rep["failures"], fault
        assert lens.verify()["ok"], fault


def test_unknown_fault_name_rejected():
    lens = _lens(fields.two_bump())
    with pytest.raises(ValueError):
        lens.verify(inject_fault="gamma-ray")


# ---------------------------------------------------------------------------
# facets


def test_facet_counts_frozen():
    for name, f, n in [("two_bump", fields.two_bump(), 2),
                       ("plus", fields.plus_field(), 4),
                       ("hole7", fields.hole7(), 3)]:
        lens = _lens(f)
        assert len(lens.facets()) == n, name


def test_every_alive_region_has_a_facet():
    for name, f in _cases():
        lens = _lens(f)
        facets = lens.facets()
        covered = {fc.region.rid for fc in facets}
        assert covered == {r.rid for r in lens.alive_regions()}, name
        roots = [fc for fc in facets if fc.region.sense == "root"]
        assert len(roots) == 1 and roots[0].has_frame, name
