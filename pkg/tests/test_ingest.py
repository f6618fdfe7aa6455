"""Image loading, cell classification, and surface evaluation."""

from __future__ import annotations

import numpy as np
import pytest
from PIL import Image, UnidentifiedImageError

import fields
from varilet.ingest import LuminanceGrid, build_mesh, evaluate, load_image


def _mesh(f):
    return build_mesh(LuminanceGrid.from_array(f))


def _bilinear(f, cx, cy, u, v):
    return (f[cy, cx] * (1 - u) * (1 - v) + f[cy, cx + 1] * u * (1 - v)
            + f[cy + 1, cx] * (1 - u) * v + f[cy + 1, cx + 1] * u * v)


# ---------------------------------------------------------------------------
# loading


def test_gray_png_round_trip(tmp_path):
    path = tmp_path / "gray.png"
    Image.new("L", (2, 2), 128).save(path)
    grid = load_image(path)
    assert grid.values.shape == (2, 2)
    assert np.all(grid.values == 128.0)
    assert grid.rgb is None


def test_red_png_luma(tmp_path):
    path = tmp_path / "red.png"
    Image.new("RGB", (2, 2), (255, 0, 0)).save(path)
    grid = load_image(path)
    assert abs(grid.values[0, 0] - 76.245) < 1e-9
    assert grid.rgb.shape == (2, 2, 3)
    assert tuple(grid.rgb[0, 0]) == (255, 0, 0)


def test_undecodable_file_rejected(tmp_path):
    path = tmp_path / "junk.png"
    path.write_text("this is not an image")
    with pytest.raises(UnidentifiedImageError):
        load_image(path)


def test_from_array_requires_two_dims():
    with pytest.raises(ValueError):
        LuminanceGrid.from_array([1.0, 2.0, 3.0])


def test_mesh_requires_two_by_two():
    with pytest.raises(ValueError):
        _mesh(np.zeros((1, 5)))


# ---------------------------------------------------------------------------
# cell classification


def test_constant_cell_is_plain():
    mesh = _mesh(np.zeros((2, 2)))
    assert mesh.n_saddles == 0
    assert mesh.cell_saddle[0] == -1


def test_checker_cell_splits_at_center():
    mesh = _mesh(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert mesh.n_saddles == 1
    x, y = mesh.saddle_pos[0]
    assert abs(x - 0.5) < 1e-12 and abs(y - 0.5) < 1e-12
    assert abs(mesh.site_values[mesh.saddle_site(0)] - 0.5) < 1e-12


def test_ramp_cell_stays_plain():
    # Corner pattern (0, 1, 2, 3) has a vanishing cross term, so the cell
    # is a plain bilinear patch even though opposite corners alternate.
    mesh = _mesh(np.array([[0.0, 1.0], [2.0, 3.0]]))
    assert mesh.n_saddles == 0


def test_split_count_on_noise():
    rng = np.random.default_rng(3)
    f = rng.uniform(0.0, 255.0, size=(9, 9))
    mesh = _mesh(f)
    # A cell splits exactly when both horizontal differences and both
    # vertical differences disagree in perturbed sign.
    splits = 0
    for cell in range((mesh.height - 1) * (mesh.width - 1)):
        c00, c10, c01, c11 = mesh.cell_corners(cell)
        v = mesh.site_values
        horiz = (v[c10] >= v[c00]) != (v[c11] >= v[c01])
        vert = (v[c01] >= v[c00]) != (v[c11] >= v[c10])
        assert (mesh.cell_saddle[cell] >= 0) == (horiz and vert)
        splits += int(horiz and vert)
    assert splits == mesh.n_saddles


def test_saddle_sites_follow_samples():
    mesh = _mesh(fields.plus_field())
    assert mesh.n_sites == mesh.n_samples + mesh.n_saddles
    for k in range(mesh.n_saddles):
        cell = mesh.saddle_cell[k]
        corners = set(mesh.cell_corners(cell))
        spokes = set(mesh.neighbors(mesh.saddle_site(k)).tolist())
        assert spokes == corners


# ---------------------------------------------------------------------------
# evaluation


def test_corner_values_exact():
    rng = np.random.default_rng(11)
    f = rng.uniform(0.0, 255.0, size=(5, 7))
    mesh = _mesh(f)
    for y in range(5):
        for x in range(7):
            assert evaluate(mesh, float(x), float(y)) == f[y, x]


def test_plain_cell_center():
    mesh = _mesh(np.array([[0.0, 0.0], [0.0, 4.0]]))
    assert abs(evaluate(mesh, 0.5, 0.5) - 1.0) < 1e-12


def test_split_cell_center_hits_saddle_value():
    mesh = _mesh(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert abs(evaluate(mesh, 0.5, 0.5) - 0.5) < 1e-12


def test_out_of_domain_point_rejected():
    mesh = _mesh(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        evaluate(mesh, 2.5, 1.0)
    with pytest.raises(ValueError):
        evaluate(mesh, 1.0, -0.1)


def test_patch_values_bounded_by_sites():
    # Piecewise monotone patches take their extremes on cell corners or
    # the split-cell saddle, never at other interior points.
    rng = np.random.default_rng(4)
    for trial in range(3):
        f = rng.uniform(0.0, 255.0, size=(4, 4))
        mesh = _mesh(f)
        v = mesh.site_values
        for cell in range(9):
            c = list(mesh.cell_corners(cell))
            if mesh.cell_saddle[cell] >= 0:
                c.append(mesh.saddle_site(mesh.cell_saddle[cell]))
            lo, hi = v[c].min(), v[c].max()
            cy, cx = divmod(cell, 3)
            for u in np.linspace(0.02, 0.98, 9):
                for w in np.linspace(0.02, 0.98, 9):
                    val = evaluate(mesh, cx + u, cy + w)
                    assert lo - 1e-9 <= val <= hi + 1e-9


def test_continuity_on_grid_lines():
    # On any shared cell border both patch readings reduce to the linear
    # interpolant of the two shared samples.
    rng = np.random.default_rng(8)
    f = rng.uniform(0.0, 255.0, size=(6, 6))
    mesh = _mesh(f)
    for t in np.linspace(0.0, 1.0, 7):
        for k in range(1, 5):
            for base in range(5):
                want = (1 - t) * f[base, k] + t * f[base + 1, k]
                assert abs(evaluate(mesh, float(k), base + t) - want) < 1e-12
                want = (1 - t) * f[k, base] + t * f[k, base + 1]
                assert abs(evaluate(mesh, base + t, float(k)) - want) < 1e-12


def test_continuity_on_spokes():
    rng = np.random.default_rng(15)
    f = rng.uniform(0.0, 255.0, size=(5, 5))
    mesh = _mesh(f)
    assert mesh.n_saddles > 0
    v = mesh.site_values
    for k in range(mesh.n_saddles):
        sx, sy = mesh.saddle_pos[k]
        sval = v[mesh.saddle_site(k)]
        for corner in mesh.cell_corners(mesh.saddle_cell[k]):
            cxp, cyp = mesh.site_position(corner)
            for t in np.linspace(0.05, 0.95, 7):
                x = cxp + t * (sx - cxp)
                y = cyp + t * (sy - cyp)
                want = (1 - t) * v[corner] + t * sval
                assert abs(evaluate(mesh, x, y) - want) < 1e-12


def test_plain_cell_matches_bilinear_form():
    rng = np.random.default_rng(21)
    f = rng.uniform(0.0, 255.0, size=(4, 5))
    mesh = _mesh(f)
    for cell in range(12):
        if mesh.cell_saddle[cell] >= 0:
            continue
        cy, cx = divmod(cell, 4)
        for u, v in rng.uniform(0.0, 1.0, size=(5, 2)):
            got = evaluate(mesh, cx + u, cy + v)
            assert abs(got - _bilinear(f, cx, cy, u, v)) < 1e-12


@pytest.mark.skipif(fields.berkeley_path() is None,
                    reason="BSDS image not present; set VARILET_BSDS_385028")
def test_berkeley_dimensions():
    grid = load_image(fields.berkeley_path())
    assert sorted((grid.height, grid.width)) == [321, 481]
