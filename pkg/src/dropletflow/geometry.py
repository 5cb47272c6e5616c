"""Closed marker curves and planar regions.

Curves are counterclockwise polylines.  The inward normal is the +pi/2
rotation of the tangent, and curvature is positive where the curve is
locally convex.

Regions are compared on a pixel raster.  Pixel edges sit on multiples of
the resolution ``h``; when a lattice cell union is involved ``h`` divides
``1/(2L)`` so cell edges coincide with pixel edges and cells are rasterized
without error.  Dilation and erosion use exact Euclidean distance
transforms between pixel centers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import shapely
from scipy import ndimage

MIN_MARKERS = 16
DEFAULT_MAX_H = 1.0 / 1024


class DegenerateCurveError(ValueError):
    pass


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def is_simple(points: np.ndarray) -> bool:
    """True when the closed polyline through ``points`` does not self-intersect."""
    return bool(shapely.LinearRing(points).is_simple)


class MarkerCurve:
    """Closed counterclockwise polyline with cached differential quantities.

    Parameters
    ----------
    points : array_like, shape (N, 2)
        Marker positions, first point not repeated at the end.  Clockwise
        input is reversed.
    theta : array_like, optional
        Tangent angles to use instead of the ones estimated from the
        markers.  Offsets pass the source angles through, since moving
        along the normal preserves it.
    check_simple : bool
        Reject self-intersecting input.
    """

    def __init__(self, points, theta=None, *, check_simple: bool = True):
        pts = np.array(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must have shape (N, 2)")
        if len(pts) < MIN_MARKERS:
            raise ValueError(f"a marker curve needs at least {MIN_MARKERS} markers, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("marker positions must be finite")
        edges = np.roll(pts, -1, axis=0) - pts
        h = np.hypot(edges[:, 0], edges[:, 1])
        scale = max(float(np.ptp(pts[:, 0])), float(np.ptp(pts[:, 1])), 1e-300)
        if np.any(h <= 1e-13 * scale):
            i = int(np.argmin(h))
            raise DegenerateCurveError(
                f"markers {i} and {(i + 1) % len(pts)} coincide; resample the curve by arc length"
            )
        if _signed_area(pts) < 0:
            pts = pts[::-1].copy()
            theta = None
        if check_simple and not is_simple(pts):
            raise ValueError("curve self-intersects")
        pts.setflags(write=False)
        self._points = pts
        if theta is not None:
            theta = np.array(theta, dtype=float)
            if theta.shape != (len(pts),):
                raise ValueError("theta must have one entry per marker")
            theta.setflags(write=False)
        self._theta_override = theta

    def __len__(self) -> int:
        return len(self._points)

    def __repr__(self) -> str:
        return f"MarkerCurve(N={len(self)}, area={self.area:.6g}, length={self.length:.6g})"

    @property
    def points(self) -> np.ndarray:
        return self._points

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        """Length of the edge from marker i to marker i+1."""
        e = np.roll(self._points, -1, axis=0) - self._points
        return np.hypot(e[:, 0], e[:, 1])

    @cached_property
    def ds(self) -> np.ndarray:
        """Arc length attributed to each marker (half of each adjacent edge)."""
        h = self.edge_lengths
        return 0.5 * (h + np.roll(h, 1))

    @cached_property
    def turning(self) -> np.ndarray:
        """Signed exterior angle at each marker, in (-pi, pi)."""
        e = np.roll(self._points, -1, axis=0) - self._points
        prev = np.roll(e, 1, axis=0)
        cross = prev[:, 0] * e[:, 1] - prev[:, 1] * e[:, 0]
        dot = np.einsum("ij,ij->i", prev, e)
        tau = np.arctan2(cross, dot)
        if np.any(np.abs(tau) > math.pi - 1e-9):
            i = int(np.argmax(np.abs(tau)))
            raise DegenerateCurveError(f"curve folds back on itself at marker {i}; resample the curve")
        return tau

    @cached_property
    def theta(self) -> np.ndarray:
        """Unwrapped tangent angle at each marker."""
        if self._theta_override is not None:
            return self._theta_override
        p = self._points
        d = np.roll(p, -1, axis=0) - np.roll(p, 1, axis=0)
        return np.unwrap(np.arctan2(d[:, 1], d[:, 0]))

    @cached_property
    def curvature(self) -> np.ndarray:
        # Edge angles live at edge midpoints; their centered difference over
        # the dual length is the curvature at the marker in between.
        return self.turning / self.ds

    @cached_property
    def normals(self) -> np.ndarray:
        """Inward unit normals."""
        th = self.theta
        return np.column_stack((-np.sin(th), np.cos(th)))

    @cached_property
    def area(self) -> float:
        return _signed_area(self._points)

    @cached_property
    def length(self) -> float:
        return float(self.edge_lengths.sum())

    @cached_property
    def arclength(self) -> np.ndarray:
        """Cumulative arc length at each marker, starting from 0."""
        return np.concatenate(([0.0], np.cumsum(self.edge_lengths)[:-1]))

    @property
    def centroid(self) -> np.ndarray:
        p = self._points
        q = np.roll(p, -1, axis=0)
        cross = p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]
        a = 0.5 * cross.sum()
        cx = ((p[:, 0] + q[:, 0]) * cross).sum() / (6 * a)
        cy = ((p[:, 1] + q[:, 1]) * cross).sum() / (6 * a)
        return np.array([cx, cy])

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        p = self._points
        return float(p[:, 0].min()), float(p[:, 1].min()), float(p[:, 0].max()), float(p[:, 1].max())

    @property
    def diameter(self) -> float:
        p = self._points
        if len(p) > 2048:
            from scipy.spatial import ConvexHull

            p = p[ConvexHull(p).vertices]
        d = p[:, None, :] - p[None, :, :]
        return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))

    def is_simple(self) -> bool:
        return is_simple(self._points)

    def resampled(self, n: int | None = None) -> "MarkerCurve":
        """Markers redistributed uniformly in arc length along a periodic cubic spline."""
        from scipy.interpolate import CubicSpline

        n = len(self) if n is None else int(n)
        p = self._points
        s = np.concatenate(([0.0], np.cumsum(self.edge_lengths)))
        closed = np.vstack((p, p[:1]))
        spline = CubicSpline(s, closed, bc_type="periodic")
        # one fixed-point pass on the spline's own arc length
        fine = np.linspace(0.0, s[-1], 8 * n + 1)
        q = spline(fine)
        seg = np.hypot(*np.diff(q, axis=0).T)
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        target = np.linspace(0.0, cum[-1], n + 1)[:-1]
        return MarkerCurve(spline(np.interp(target, cum, fine)), check_simple=False)


def curvature_and_angle(curve: MarkerCurve) -> tuple[np.ndarray, np.ndarray]:
    return curve.theta, curve.curvature


def area(curve: MarkerCurve) -> float:
    return curve.area


def length(curve: MarkerCurve) -> float:
    return curve.length


def turning_number(curve: MarkerCurve) -> float:
    """Total curvature divided by 2 pi (1 for a simple counterclockwise curve)."""
    return float(np.sum(curve.curvature * curve.ds)) / (2 * math.pi)


def _segment_distance(p1, p2, q1, q2) -> np.ndarray:
    """Vectorized minimum distance between segments [p1, p2] and [q1, q2]."""

    def point_seg(a, b, c):
        ab = c - b
        t = np.einsum("ij,ij->i", a - b, ab) / np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
        t = np.clip(t, 0.0, 1.0)
        proj = b + t[:, None] * ab
        return np.hypot(*(a - proj).T)

    return np.minimum.reduce([
        point_seg(p1, q1, q2), point_seg(p2, q1, q2),
        point_seg(q1, p1, p2), point_seg(q2, p1, p2),
    ])


def neck_width(curve: MarkerCurve, chunk: int = 256) -> float:
    """Smallest locally minimal distance between non-adjacent boundary points.

    Marker pairs (i, j) whose distance is not larger than that of the
    eight neighbouring pairs (i +- 1, j +- 1) are candidates; pairs closer
    than four marker spacings along the curve are excluded.  Candidates are
    refined with segment-to-segment distances.  Returns ``inf`` when there
    is no such pair (convex curves).
    """
    p = curve.points
    n = len(p)
    s = curve.arclength
    total = curve.length
    excl = 4.0 * float(curve.edge_lengths.max())
    best = math.inf
    idx = np.arange(n)
    for a in range(0, n, chunk):
        rows = np.arange(a - 1, min(a + chunk, n) + 1) % n
        d = np.hypot(p[rows, None, 0] - p[None, :, 0], p[rows, None, 1] - p[None, :, 1])
        core = d[1:-1]
        ok = np.ones_like(core, dtype=bool)
        for di in (-1, 0, 1):
            block = d[1 + di: d.shape[0] - 1 + di]
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                ok &= core <= np.roll(block, -dj, axis=1)
        i_rows = rows[1:-1]
        sep = np.abs(s[i_rows][:, None] - s[None, :])
        sep = np.minimum(sep, total - sep)
        ok &= sep > excl
        ok &= i_rows[:, None] < idx[None, :]
        ii, jj = np.nonzero(ok)
        if len(ii) == 0:
            continue
        i, j = i_rows[ii], jj
        cand = core[ii, jj]
        for di in (-1, 0):
            for dj in (-1, 0):
                i0, j0 = (i + di) % n, (j + dj) % n
                cand = np.minimum(cand, _segment_distance(p[i0], p[(i0 + 1) % n], p[j0], p[(j0 + 1) % n]))
        best = min(best, float(cand.min()))
    return best


def reach(curve: MarkerCurve) -> float:
    """Largest |x| for which every normal offset by x stays simple.

    Half the neck width or the smallest radius of curvature, whichever is
    smaller.
    """
    kmax = float(np.max(np.abs(curve.curvature)))
    r = math.inf if kmax == 0 else 1.0 / kmax
    return min(0.5 * neck_width(curve), r)


def offset(curve: MarkerCurve, x: float, *, check_reach: bool = True) -> MarkerCurve:
    """Move every marker by ``x`` along the inward normal (x > 0 shrinks)."""
    if x == 0:
        return curve
    if check_reach:
        m = reach(curve)
        if abs(x) >= m:
            raise ValueError(f"offset {x} is not below the reach {m:.6g}; the result would self-intersect")
    pts = curve.points + x * curve.normals
    return MarkerCurve(pts, theta=curve.theta, check_simple=True)


# ---------------------------------------------------------------- regions


@dataclass(frozen=True)
class Grid:
    """Pixel raster; pixel (i, j) has center (x0 + (i + 1/2) h, y0 + (j + 1/2) h)."""

    x0: float
    y0: float
    h: float
    nx: int
    ny: int

    @classmethod
    def covering(cls, bbox, h: float, pad: int = 2) -> "Grid":
        xmin, ymin, xmax, ymax = bbox
        i0 = math.floor(xmin / h) - pad
        j0 = math.floor(ymin / h) - pad
        i1 = math.ceil(xmax / h) + pad
        j1 = math.ceil(ymax / h) + pad
        return cls(i0 * h, j0 * h, h, i1 - i0, j1 - j0)

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + (np.arange(self.nx) + 0.5) * self.h

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + (np.arange(self.ny) + 0.5) * self.h

    def padded(self, k: int) -> "Grid":
        return Grid(self.x0 - k * self.h, self.y0 - k * self.h, self.h, self.nx + 2 * k, self.ny + 2 * k)

    def center(self, i: int, j: int) -> tuple[float, float]:
        return self.x0 + (i + 0.5) * self.h, self.y0 + (j + 0.5) * self.h


def _union_bbox(*boxes):
    boxes = [b for b in boxes if b is not None]
    if not boxes:
        return None
    b = np.array(boxes)
    return float(b[:, 0].min()), float(b[:, 1].min()), float(b[:, 2].max()), float(b[:, 3].max())


class Region:
    """Compact planar set that can be rasterized."""

    def bbox(self):
        raise NotImplementedError

    def mask(self, grid: Grid) -> np.ndarray:
        xs, ys = np.meshgrid(grid.xs, grid.ys, indexing="ij")
        return self.contains(xs, ys)

    def contains(self, x, y) -> np.ndarray:
        raise NotImplementedError

    @property
    def lattice_scale(self) -> int | None:
        return None

    def resolution(self) -> float:
        return DEFAULT_MAX_H

    def is_empty(self) -> bool:
        return self.bbox() is None


class EmptyRegion(Region):
    def bbox(self):
        return None

    def mask(self, grid):
        return np.zeros((grid.nx, grid.ny), dtype=bool)

    def contains(self, x, y):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape, dtype=bool)

    def __repr__(self):
        return "EmptyRegion()"


def _scanline_fill(points: np.ndarray, grid: Grid) -> np.ndarray:
    """Even-odd fill of a closed polygon evaluated at pixel centers."""
    x0, y0 = points[:, 0], points[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    ys, xs = grid.ys, grid.xs
    # edge e crosses row j iff lo <= ys[j] < hi, so shared vertices count once
    j_lo = np.searchsorted(ys, np.minimum(y0, y1))
    j_hi = np.searchsorted(ys, np.maximum(y0, y1))
    counts = j_hi - j_lo
    edge = np.repeat(np.arange(len(x0)), counts)
    row = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts) + j_lo[edge]
    t = (ys[row] - y0[edge]) / (y1[edge] - y0[edge])
    xc = x0[edge] + t * (x1[edge] - x0[edge])
    col = np.searchsorted(xs, xc, side="right")
    toggles = np.zeros((grid.nx + 1, grid.ny), dtype=np.int32)
    np.add.at(toggles, (col, row), 1)
    return (np.cumsum(toggles[:-1], axis=0) % 2).astype(bool)


class PolygonRegion(Region):
    """Closed interior of a marker curve."""

    def __init__(self, curve: MarkerCurve):
        self.curve = curve

    @cached_property
    def _shapely(self):
        return shapely.Polygon(self.curve.points)

    def bbox(self):
        return self.curve.bbox

    def mask(self, grid):
        return _scanline_fill(self.curve.points, grid)

    def contains(self, x, y):
        return shapely.intersects_xy(self._shapely, np.asarray(x, float), np.asarray(y, float))

    def boundary_distance(self, x, y):
        pts = shapely.points(np.asarray(x, float), np.asarray(y, float))
        return shapely.distance(self._shapely.exterior, pts)

    @property
    def area(self) -> float:
        return self.curve.area

    def __repr__(self):
        return f"PolygonRegion({self.curve!r})"


class CellRegion(Region):
    """Union of closed squares of side 1/L centered at lattice points (i/L, j/L)."""

    def __init__(self, L: int, cells):
        self.L = int(L)
        c = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
        if len(c):
            c = np.unique(c, axis=0)
        self.cells = c

    @property
    def lattice_scale(self):
        return self.L

    def resolution(self):
        return min(1.0 / self.L, DEFAULT_MAX_H)

    def __len__(self):
        return len(self.cells)

    @property
    def area(self) -> float:
        return len(self.cells) / self.L**2

    def bbox(self):
        if len(self.cells) == 0:
            return None
        lo = self.cells.min(axis=0) - 0.5
        hi = self.cells.max(axis=0) + 0.5
        return lo[0] / self.L, lo[1] / self.L, hi[0] / self.L, hi[1] / self.L

    @cached_property
    def _dense(self):
        lo = self.cells.min(axis=0)
        shape = self.cells.max(axis=0) - lo + 1
        d = np.zeros(shape, dtype=bool)
        d[self.cells[:, 0] - lo[0], self.cells[:, 1] - lo[1]] = True
        return lo, d

    def contains(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if len(self.cells) == 0:
            return np.zeros(x.shape, dtype=bool)
        lo, d = self._dense
        i = np.rint(x * self.L).astype(np.int64) - lo[0]
        j = np.rint(y * self.L).astype(np.int64) - lo[1]
        ok = (i >= 0) & (j >= 0) & (i < d.shape[0]) & (j < d.shape[1])
        out = np.zeros(x.shape, dtype=bool)
        out[ok] = d[i[ok], j[ok]]
        return out

    def __eq__(self, other):
        return isinstance(other, CellRegion) and self.L == other.L and np.array_equal(self.cells, other.cells)

    def __repr__(self):
        return f"CellRegion(L={self.L}, cells={len(self.cells)})"


def cell_outline(region: CellRegion) -> np.ndarray:
    """Boundary edges of a cell union as rows ``x0 y0 x1 y1``.

    An edge is emitted wherever a cell meets a cell outside the union.
    """
    if len(region.cells) == 0:
        return np.zeros((0, 4))
    lo, d = region._dense
    pad = np.pad(d, 1)
    inner = pad[1:-1, 1:-1]
    h = 0.5
    segs = []
    # (neighbour slice, edge offsets from the cell center)
    for nb, (a, b) in (
        (pad[2:, 1:-1], ((h, -h), (h, h))),
        (pad[:-2, 1:-1], ((-h, h), (-h, -h))),
        (pad[1:-1, 2:], ((h, h), (-h, h))),
        (pad[1:-1, :-2], ((-h, -h), (h, -h))),
    ):
        ii, jj = np.nonzero(inner & ~nb)
        ci, cj = ii + lo[0], jj + lo[1]
        segs.append(np.column_stack((ci + a[0], cj + a[1], ci + b[0], cj + b[1])))
    return np.vstack(segs) / region.L


class PointRegion(Region):
    """A single point; rasterizes to the pixel that contains it."""

    def __init__(self, x: float, y: float):
        self.x, self.y = float(x), float(y)

    def bbox(self):
        return self.x, self.y, self.x, self.y

    def mask(self, grid):
        out = np.zeros((grid.nx, grid.ny), dtype=bool)
        i = math.floor((self.x - grid.x0) / grid.h)
        j = math.floor((self.y - grid.y0) / grid.h)
        if 0 <= i < grid.nx and 0 <= j < grid.ny:
            out[i, j] = True
        return out

    def contains(self, x, y):
        return (np.asarray(x) == self.x) & (np.asarray(y) == self.y)

    def boundary_distance(self, x, y):
        return np.hypot(np.asarray(x) - self.x, np.asarray(y) - self.y)

    def __repr__(self):
        return f"PointRegion({self.x!r}, {self.y!r})"


class DilatedRegion(Region):
    """Dilation (eta > 0) or erosion (eta < 0) of a base region by a ball."""

    def __init__(self, base: Region, eta: float):
        self.base = base
        self.eta = float(eta)

    @property
    def lattice_scale(self):
        return self.base.lattice_scale

    def resolution(self):
        return min(self.base.resolution(), abs(self.eta) / 8, DEFAULT_MAX_H)

    def bbox(self):
        b = self.base.bbox()
        if b is None:
            return None
        if self.eta > 0:
            e = self.eta
            return b[0] - e, b[1] - e, b[2] + e, b[3] + e
        if isinstance(self.base, PointRegion):
            return None
        return b

    def mask(self, grid):
        eta = self.eta
        if isinstance(self.base, PointRegion):
            if eta < 0:
                return np.zeros((grid.nx, grid.ny), dtype=bool)
            xs, ys = np.meshgrid(grid.xs, grid.ys, indexing="ij")
            return np.hypot(xs - self.base.x, ys - self.base.y) <= eta
        k = int(math.ceil(abs(eta) / grid.h)) + 2
        ext = grid.padded(k)
        base = self.base.mask(ext)
        tol = 1e-9 * grid.h
        if eta > 0:
            if not base.any():
                out = base
            else:
                out = ndimage.distance_transform_edt(~base) * grid.h <= eta + tol
        else:
            out = ndimage.distance_transform_edt(base) * grid.h > -eta + tol
        return out[k:-k, k:-k]

    def contains(self, x, y):
        base = self.base
        if not hasattr(base, "boundary_distance"):
            raise NotImplementedError("pointwise membership needs a polygon or point base")
        d = base.boundary_distance(x, y)
        inside = base.contains(x, y)
        if self.eta > 0:
            return inside | (d <= self.eta)
        return inside & (d > -self.eta)

    def is_empty(self) -> bool:
        b = self.bbox()
        if b is None:
            return True
        grid = Grid.covering(b, _aligned_resolution([self]))
        return not self.mask(grid).any()

    def __repr__(self):
        return f"DilatedRegion({self.base!r}, eta={self.eta!r})"


def _aligned_resolution(regions, h: float | None = None) -> float:
    if h is None:
        h = min(r.resolution() for r in regions)
    scales = {r.lattice_scale for r in regions if r.lattice_scale}
    if len(scales) > 1:
        # pixels can only align with one lattice; use the finest
        scales = {max(scales)}
    for L in scales:
        m = 2 * math.ceil(1.0 / (2 * L * h) - 1e-9)
        h = 1.0 / (L * m)
    return h


def raster_tolerance(h: float) -> float:
    """Worst-case error of a raster distance at resolution h."""
    return math.sqrt(2) * h


def dilate_erode(region: Region, eta: float) -> Region:
    """Union of closed eta-balls around the region (eta > 0) or its erosion (eta < 0)."""
    if eta == 0 or region.is_empty():
        return region
    if isinstance(region, DilatedRegion) and (region.eta > 0) == (eta > 0):
        return DilatedRegion(region.base, region.eta + eta)
    return DilatedRegion(region, eta)


def hausdorff(a: Region, b: Region, h: float | None = None) -> float:
    """Symmetric Hausdorff distance, evaluated between pixel centers."""
    ba, bb = a.bbox(), b.bbox()
    if ba is None or bb is None:
        raise ValueError("hausdorff distance is undefined for an empty region")
    h = _aligned_resolution([a, b], h)
    grid = Grid.covering(_union_bbox(ba, bb), h)
    ma, mb = a.mask(grid), b.mask(grid)
    if not ma.any() or not mb.any():
        raise ValueError("hausdorff distance is undefined for an empty region")
    dab = ndimage.distance_transform_edt(~mb)[ma].max()
    dba = ndimage.distance_transform_edt(~ma)[mb].max()
    return float(max(dab, dba) * h)


@dataclass(frozen=True)
class InclusionVerdict:
    holds: bool
    witness: tuple[float, float] | None = None
    excess: float = 0.0
    resolution: float = 0.0

    def __bool__(self):
        return self.holds


def inclusion_check(inner: Region, outer: Region, eta: float = 0.0, h: float | None = None) -> InclusionVerdict:
    """Test ``inner`` subset of ``dilate_erode(outer, eta)``.

    On failure the witness is the pixel center of ``inner`` farthest from
    the (dilated or eroded) outer set.
    """
    target = dilate_erode(outer, eta)
    b = inner.bbox()
    if b is None:
        return InclusionVerdict(True)
    h = _aligned_resolution([inner, target], h)
    grid = Grid.covering(_union_bbox(b, target.bbox()), h)
    mi = inner.mask(grid)
    if not mi.any():
        return InclusionVerdict(True, resolution=h)
    mo = target.mask(grid)
    bad = mi & ~mo
    if not bad.any():
        return InclusionVerdict(True, resolution=h)
    dist = ndimage.distance_transform_edt(~mo) * h if mo.any() else np.full(bad.shape, np.inf)
    masked = np.where(bad, dist, -1.0)
    i, j = np.unravel_index(int(np.argmax(masked)), masked.shape)
    excess = float(masked[i, j])
    return InclusionVerdict(False, witness=grid.center(i, j), excess=excess, resolution=h)
