import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import circle, rounded_square
from dropletflow import geometry as g
from dropletflow.geometry import CellRegion, EmptyRegion, MarkerCurve, PointRegion, PolygonRegion
from dropletflow.shapes import ShapeSpec


def polar_curve(radii, n=512):
    """Star-shaped curve r(phi) = r0 + sum a_m cos(m phi + p_m)."""
    phi = 2 * np.pi * np.arange(n) / n
    r = np.full(n, radii[0])
    for m, (a, p) in enumerate(radii[1:], start=2):
        r = r + a * np.cos(m * phi + p)
    return MarkerCurve(np.column_stack((r * np.cos(phi), r * np.sin(phi))))


def dumbbell(n=2048):
    """Two disks joined by a bar of width 0.1, concave fillets of radius 0.05."""
    shape = shapely.union_all([
        shapely.Point(-0.35, 0).buffer(0.25, quad_segs=256),
        shapely.Point(0.35, 0).buffer(0.25, quad_segs=256),
        shapely.box(-0.35, -0.05, 0.35, 0.05),
    ])
    closed = shape.buffer(0.05, quad_segs=256).buffer(-0.05, quad_segs=256)
    pts = np.asarray(closed.exterior.coords)[:-1]
    return MarkerCurve(pts).resampled(n)


disks = dict(c=st.tuples(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2)), r=st.floats(0.1, 0.4))


# ---------------------------------------------------------------- curves


def test_circle_curvature():
    c = circle(0.5, 256)
    theta, k = g.curvature_and_angle(c)
    assert np.max(np.abs(k - 2.0)) < 1e-3
    assert theta[-1] - theta[0] == pytest.approx(2 * np.pi * 255 / 256, abs=1e-9)


def test_rounded_square_curvature():
    rho = 0.1
    c = rounded_square(0.6, rho, n_arc=64, n_side=64)
    k = c.curvature
    n_per = 128
    for corner in range(4):
        arc = k[corner * n_per + 2: corner * n_per + 62]
        side = k[corner * n_per + 66: corner * n_per + 126]
        assert np.max(np.abs(arc - 1 / rho)) < 1e-2 * (1 / rho)
        assert np.max(np.abs(side)) < 1e-2


def test_ellipse_max_curvature():
    c = ShapeSpec.ellipse(0.6, 0.3).curve(512)
    assert np.max(c.curvature) == pytest.approx(0.6 / 0.3**2, rel=0.01)


def test_area_length():
    c = circle(1.0, 4096)
    assert g.area(c) == pytest.approx(np.pi, abs=1e-5)
    assert g.length(c) == pytest.approx(2 * np.pi, abs=1e-5)
    s = np.linspace(0, 1, 16, endpoint=False)
    sq = np.vstack([np.column_stack((s, 0 * s)), np.column_stack((1 + 0 * s, s)),
                    np.column_stack((1 - s, 1 + 0 * s)), np.column_stack((0 * s, 1 - s))])
    c = MarkerCurve(sq)
    assert g.area(c) == pytest.approx(1.0, abs=1e-14)
    assert g.length(c) == pytest.approx(4.0, abs=1e-14)


def test_star_area():
    c = ShapeSpec.star(0.5, 0.2, 6).curve(2048)
    assert g.area(c) == pytest.approx(np.pi * 0.25 * 1.02, abs=1e-4)


def test_orientation_normalized_and_degenerate_rejected():
    pts = circle(0.5, 64).points
    c = MarkerCurve(pts[::-1])
    assert c.area > 0
    with pytest.raises(g.DegenerateCurveError):
        MarkerCurve(np.vstack([pts[:10], pts[9:10], pts[10:]]))
    with pytest.raises(ValueError):
        MarkerCurve(pts[:8])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 0.5), st.lists(st.tuples(st.floats(0, 0.04), st.floats(0, 6.3)), min_size=1, max_size=5),
       st.sampled_from([128, 256, 512]))
def test_turning_number(r0, modes, n):
    c = polar_curve([r0] + modes, n)
    assert abs(np.sum(c.curvature * c.ds) - 2 * np.pi) <= 1e-6 * n
    assert g.turning_number(c) == pytest.approx(1.0, abs=1e-12)
    th = c.theta
    closing = math.remainder(th[0] - th[-1], 2 * np.pi)
    assert th[-1] - th[0] + closing == pytest.approx(2 * np.pi, abs=1e-9)
    assert np.all(np.diff(th) > -np.pi / 2)


# --------------------------------------------------------------- offsets


def test_offset_circle():
    c = circle(0.5, 512)
    o = g.offset(c, 0.25)
    assert np.max(np.abs(np.hypot(*o.points.T) - 0.25)) < 1e-12
    assert np.max(np.abs(o.curvature - 4.0)) < 1e-2
    assert np.array_equal(g.offset(c, 0.0).points, c.points)


@pytest.mark.parametrize("x", [-0.1, -0.05, 0.05, 0.1])
def test_offset_curvature_relation_ellipse(x):
    c = ShapeSpec.ellipse(0.6, 0.3).curve(1024)
    o = g.offset(c, x)
    pred = c.curvature / (1 - c.curvature * x)
    assert np.max(np.abs(o.curvature - pred)) < 1e-2 * np.max(np.abs(pred))


def test_offset_steiner_ellipse():
    c = ShapeSpec.ellipse(0.6, 0.3).curve(1024)
    x = 0.05
    o = g.offset(c, x)
    expected = c.area - c.length * x + np.pi * x * x
    assert o.area == pytest.approx(expected, rel=0.01)


def test_offset_beyond_reach_rejected():
    c = ShapeSpec.ellipse(0.6, 0.3).curve(512)
    with pytest.raises(ValueError):
        g.offset(c, 0.2)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 0.5), st.lists(st.tuples(st.floats(0, 0.03), st.floats(0, 6.3)), min_size=1, max_size=3),
       st.floats(-0.49, 0.49))
def test_offset_roundtrip_and_steiner(r0, modes, frac):
    c = polar_curve([r0] + modes, 512)
    x = frac * g.reach(c)
    back = g.offset(g.offset(c, x), -x)
    assert np.max(np.abs(back.points - c.points)) < 1e-9
    o = g.offset(c, x)
    assert o.area == pytest.approx(c.area - c.length * x + np.pi * x * x, rel=0.01)


# ----------------------------------------------------------------- reach


def test_reach_examples():
    assert g.reach(circle(0.5, 256)) == pytest.approx(0.5, rel=1e-3)
    assert g.neck_width(circle(0.5, 256)) == math.inf
    assert g.reach(ShapeSpec.ellipse(0.6, 0.3).curve(512)) == pytest.approx(0.15, rel=1e-3)


def test_reach_dumbbell():
    c = dumbbell()
    assert g.neck_width(c) == pytest.approx(0.1, rel=1e-2)
    assert np.max(np.abs(c.curvature)) == pytest.approx(20.0, rel=0.05)
    assert g.reach(c) == pytest.approx(0.05, rel=0.05)


# --------------------------------------------------------------- regions


def disk_region(r, c=(0.0, 0.0)):
    return ShapeSpec.disk(r, center=c).region()


def test_dilate_erode_disk():
    d = disk_region(0.3)
    assert g.dilate_erode(d, 0.0) is d
    h = 1 / 1024
    grid = g.Grid.covering((-0.5, -0.5, 0.5, 0.5), h)
    big = g.dilate_erode(d, 0.1).mask(grid).sum() * h * h
    small = g.dilate_erode(d, -0.1).mask(grid).sum() * h * h
    # raster tolerance: perimeter times one pixel
    assert big == pytest.approx(np.pi * 0.16, abs=2 * np.pi * 0.4 * h)
    assert small == pytest.approx(np.pi * 0.04, abs=2 * np.pi * 0.2 * h)
    assert g.dilate_erode(d, -0.5).is_empty()


def test_hausdorff_examples():
    tol = g.raster_tolerance(1 / 1024)
    a = disk_region(0.3)
    assert g.hausdorff(a, a) == 0.0
    assert g.hausdorff(a, disk_region(0.3, (0.1, 0.0))) == pytest.approx(0.1, abs=tol)
    assert g.hausdorff(a, disk_region(0.4)) == pytest.approx(0.1, abs=tol)
    with pytest.raises(ValueError):
        g.hausdorff(a, EmptyRegion())


def test_hausdorff_cells_exact():
    a = CellRegion(16, [(0, 0)])
    b = CellRegion(16, [(0, 0), (3, 0)])
    assert g.hausdorff(a, b) == pytest.approx(3 / 16, abs=1e-12)


def test_inclusion_examples():
    d3, d4 = disk_region(0.3), disk_region(0.4)
    assert g.inclusion_check(EmptyRegion(), d3, 0.1).holds
    assert g.inclusion_check(d3, d4).holds
    v = g.inclusion_check(d4, d3)
    assert not v.holds
    r = math.hypot(*v.witness)
    assert 0.3 < r <= 0.4 + v.resolution
    assert g.inclusion_check(d4, d3, 0.1 + 2 * v.resolution).holds


def test_point_region_dilation():
    p = PointRegion(0.1, -0.2)
    d = g.dilate_erode(p, 0.05)
    assert g.hausdorff(d, disk_region(0.05, (0.1, -0.2))) <= g.raster_tolerance(1 / 1024) + 1e-12
    assert g.dilate_erode(p, -0.05).is_empty()


def test_cell_region_and_outline():
    c = CellRegion(16, [(1, 2), (0, 0), (1, 2)])
    assert len(c) == 2 and c.area == 2 / 256
    assert c.contains(0.0, 0.0) and not c.contains(0.5, 0.5)
    segs = g.cell_outline(CellRegion(16, [(0, 0), (1, 0)]))
    assert len(segs) == 6
    assert np.sum(np.hypot(segs[:, 2] - segs[:, 0], segs[:, 3] - segs[:, 1])) == pytest.approx(6 / 16)


def test_polygon_region_area_matches_curve():
    c = circle(0.3, 512)
    r = PolygonRegion(c)
    h = 1 / 1024
    grid = g.Grid.covering(r.bbox(), h)
    assert r.mask(grid).sum() * h * h == pytest.approx(c.area, abs=2 * np.pi * 0.3 * h)


@settings(max_examples=15, deadline=None)
@given(st.tuples(disks["c"], disks["r"]), st.tuples(disks["c"], disks["r"]), st.tuples(disks["c"], disks["r"]))
def test_hausdorff_metric(a, b, c):
    ra, rb, rc = (disk_region(r, cc) for cc, r in (a, b, c))
    h = 1 / 512
    dab, dba = g.hausdorff(ra, rb, h), g.hausdorff(rb, ra, h)
    assert dab == dba
    tol = 2 * g.raster_tolerance(h)
    assert dab <= g.hausdorff(ra, rc, h) + g.hausdorff(rc, rb, h) + tol
    # analytic value for disks
    exact = math.hypot(a[0][0] - b[0][0], a[0][1] - b[0][1]) + abs(a[1] - b[1])
    assert dab == pytest.approx(exact, abs=tol)


@settings(max_examples=15, deadline=None)
@given(st.tuples(disks["c"], disks["r"]), st.floats(0.01, 0.1))
def test_dilate_then_erode_contains_original(d, eta):
    base = disk_region(d[1], d[0])
    grid = g.Grid.covering((-0.8, -0.8, 0.8, 0.8), 1 / 512)
    closed = g.DilatedRegion(g.dilate_erode(base, eta), -eta)
    assert not np.any(base.mask(grid) & ~closed.mask(grid))
