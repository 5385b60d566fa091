import math

import numpy as np
import pytest

from seglab import (
    BOUNDARY,
    EXTERIOR,
    INTERIOR,
    BoundarySegment,
    ScalarField,
    build_boundary_data,
    build_disk_domain,
    dump_field,
    load_field,
    oscillation,
)

from conftest import antipodal_segments


def test_disk_shape_and_classes(disk64):
    grid, mask = disk64
    assert (grid.nx, grid.ny) == (129, 129)
    assert grid.h == 1.0 / 64.0
    cls = mask.classes
    assert set(np.unique(cls)) <= {EXTERIOR, INTERIOR, BOUNDARY}
    # center node is interior, far corner exterior
    assert cls[64, 64] == INTERIOR
    assert cls[0, 0] == EXTERIOR
    assert (cls == BOUNDARY).sum() > 0


def test_node_coordinates_exact(disk64):
    grid, _ = disk64
    assert grid.x(64) == 0.0
    assert grid.y(0) == -1.0
    assert grid.x(128) == 1.0
    X, Y = grid.meshes()
    assert X[10, 3] == grid.x(10)
    assert Y[10, 3] == grid.y(3)


def test_quadrant_symmetry(disk64):
    # the disk is centered, so the class array commutes with both axis flips
    _, mask = disk64
    cls = mask.classes
    np.testing.assert_array_equal(cls, cls[::-1, :])
    np.testing.assert_array_equal(cls, cls[:, ::-1])


def test_interior_has_full_stencil(disk64):
    _, mask = disk64
    ok = mask.stencil_ok()
    assert (mask.interior & ~ok).sum() == 0


def test_too_coarse_rejected():
    with pytest.raises(ValueError):
        build_disk_domain(1.0, 0.9, (0.0, 0.0))


def test_offset_center():
    grid, mask = build_disk_domain(0.5, 1.0 / 16.0, (0.25, -0.25))
    X, Y = grid.meshes()
    r = np.hypot(X - 0.25, Y + 0.25)
    assert (r[mask.interior] < 0.5).all()
    assert mask.radius == 0.5


def test_boundary_data_disjoint_products(disk64):
    _, mask = disk64
    phis = build_boundary_data(mask, antipodal_segments(), populations=2)
    p = phis[0].values * phis[1].values
    assert np.abs(p).max() == 0.0  # open arcs: exact zero, not just small
    for f in phis:
        assert f.values.min() == 0.0
        assert f.values.max() <= 1.0
        assert (f.values[~mask.boundary] == 0.0).all()


def test_boundary_data_amplitude_profile(disk64):
    _, mask = disk64
    amp = 2.5
    segs = [BoundarySegment(0.0, math.pi, amp, 0)]
    (phi,) = build_boundary_data(mask, segs, populations=1)
    # cos^2 bump peaks mid-arc; the node at angle pi/2 is (0, 1)
    assert phi.values[64, 128] == pytest.approx(amp, rel=1e-12)
    theta = mask.theta()
    on = mask.boundary & (theta > 0) & (theta < math.pi)
    expect = amp * np.cos(math.pi * (theta[on] - math.pi / 2) / math.pi) ** 2
    np.testing.assert_allclose(phi.values[on], expect, rtol=1e-12, atol=0)


def test_overlapping_arcs_rejected(disk64):
    _, mask = disk64
    segs = [
        BoundarySegment(0.0, 4.0, 1.0, 0),
        BoundarySegment(3.0, 6.0, 1.0, 1),
    ]
    with pytest.raises(ValueError, match="overlap"):
        build_boundary_data(mask, segs, populations=2)


def test_touching_arcs_allowed(disk64):
    _, mask = disk64
    segs = [
        BoundarySegment(0.0, math.pi, 1.0, 0),
        BoundarySegment(math.pi, 2 * math.pi, 1.0, 1),
    ]
    phis = build_boundary_data(mask, segs, populations=2)
    assert len(phis) == 2


def test_bad_segment_rejected():
    with pytest.raises(ValueError):
        BoundarySegment(2.0, 1.0, 1.0, 0)
    with pytest.raises(ValueError):
        BoundarySegment(0.0, 1.0, -1.0, 0)


def test_field_roundtrip(tmp_path, disk16):
    grid, mask = disk16
    rg = np.random.default_rng(7)
    vals = rg.standard_normal((grid.nx, grid.ny))
    f = ScalarField(grid, vals)
    path = tmp_path / "f.csv"
    dump_field(f, mask, path)
    grid2, classes2, f2 = load_field(path)
    assert (grid2.nx, grid2.ny, grid2.h) == (grid.nx, grid.ny, grid.h)
    np.testing.assert_array_equal(classes2, mask.classes)
    np.testing.assert_array_equal(f2.values, f.values)  # 17 digits: exact


def test_oscillation_known_field(disk64):
    grid, mask = disk64
    X, _ = grid.meshes()
    f = ScalarField(grid, X)
    # osc of x over a ball of radius 1/4 at center is 2 * 1/4
    assert oscillation(f, mask, (0.0, 0.0), 0.25) == pytest.approx(0.5, abs=1e-12)


def test_field_rejects_nan(disk16):
    grid, _ = disk16
    vals = np.zeros((grid.nx, grid.ny))
    vals[3, 3] = np.nan
    with pytest.raises(ValueError):
        ScalarField(grid, vals)
