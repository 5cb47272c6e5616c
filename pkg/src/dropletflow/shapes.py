"""Initial droplet shapes: disks, ellipses, polar stars and polygon files."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import MarkerCurve, PolygonRegion, Region

SHAPE_KINDS = ("disk", "ellipse", "star", "polygon")


@dataclass(frozen=True)
class ShapeSpec:
    """Parametrized initial curve.

    ``params`` holds ``(r,)`` for a disk, ``(a, b)`` for an ellipse with
    semi-axes along x and y, and ``(R, eps, m)`` for the star
    ``r(phi) = R (1 + eps cos(m phi))``.  Polygons are read from ``path``
    (``x y`` per line, or the curve snapshot format) and resampled.
    """

    kind: str
    params: tuple = ()
    center: tuple[float, float] = (0.0, 0.0)
    samples: int = 512
    path: str | None = field(default=None, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        self.validate()

    @classmethod
    def disk(cls, r, center=(0.0, 0.0), samples=512):
        return cls("disk", (r,), center, samples)

    @classmethod
    def ellipse(cls, a, b, center=(0.0, 0.0), samples=512):
        return cls("ellipse", (a, b), center, samples)

    @classmethod
    def star(cls, R, eps, m, center=(0.0, 0.0), samples=512):
        return cls("star", (R, eps, m), center, samples)

    @classmethod
    def polygon(cls, path, samples=512):
        return cls("polygon", (), (0.0, 0.0), samples, str(path))

    @classmethod
    def parse(cls, text: str, samples: int = 512, center=(0.0, 0.0)) -> "ShapeSpec":
        """Parse ``disk:0.4``, ``ellipse:0.6,0.3``, ``star:0.5,0.2,6`` or ``polygon:path``."""
        kind, _, rest = text.partition(":")
        kind = kind.strip().lower()
        if kind not in SHAPE_KINDS:
            raise ValueError(f"unknown shape kind {kind!r}; expected one of {SHAPE_KINDS}")
        if kind == "polygon":
            if not rest:
                raise ValueError("polygon shape needs a file path, e.g. polygon:curve.txt")
            return cls.polygon(rest, samples)
        try:
            params = tuple(float(v) for v in rest.split(",") if v.strip())
        except ValueError:
            raise ValueError(f"cannot parse shape parameters in {text!r}") from None
        return cls(kind, params, center, samples)

    def __str__(self) -> str:
        if self.kind == "polygon":
            return f"polygon:{self.path}"
        vals = list(self.params)
        if self.kind == "star":
            vals[2] = int(vals[2])
        return f"{self.kind}:" + ",".join(repr(v) for v in vals)

    def validate(self) -> None:
        n_params = {"disk": 1, "ellipse": 2, "star": 3, "polygon": 0}
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if len(self.params) != n_params[self.kind]:
            raise ValueError(f"{self.kind} takes {n_params[self.kind]} parameters, got {len(self.params)}")
        if self.samples < 16:
            raise ValueError("at least 16 samples are required")
        if self.kind == "polygon":
            if not self.path:
                raise ValueError("polygon shape needs a path")
            return
        sizes = self.params[:1] if self.kind == "star" else self.params
        if any(p <= 0 for p in sizes):
            raise ValueError(f"{self.kind} sizes must be positive")
        if self.kind == "star":
            _, eps, m = self.params
            if m != int(m) or m < 2:
                raise ValueError("star lobe count m must be an integer >= 2")
            if not 0 <= eps < 1:
                # r(phi) must stay positive for the polar curve to be simple
                raise ValueError("star amplitude eps must lie in [0, 1)")
        x0, y0, x1, y1 = self.bbox()
        if x0 < -1 or y0 < -1 or x1 > 1 or y1 > 1:
            raise ValueError(f"shape {self} does not fit in [-1, 1]^2")

    def bbox(self):
        cx, cy = self.center
        if self.kind == "disk":
            r = self.params[0]
            return cx - r, cy - r, cx + r, cy + r
        if self.kind == "ellipse":
            a, b = self.params
            return cx - a, cy - b, cx + a, cy + b
        if self.kind == "star":
            pts = self._polar_points(np.linspace(0, 2 * math.pi, 4096, endpoint=False))
            return pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max()
        return self.curve().bbox

    @property
    def area(self) -> float:
        """Exact enclosed area (polygon: area of the resampled curve)."""
        if self.kind == "disk":
            return math.pi * self.params[0] ** 2
        if self.kind == "ellipse":
            return math.pi * self.params[0] * self.params[1]
        if self.kind == "star":
            R, eps, _ = self.params
            return math.pi * R * R * (1 + 0.5 * eps * eps)
        return self.curve().area

    def radius(self, phi):
        R, eps, m = self.params
        return R * (1 + eps * np.cos(m * phi))

    def _polar_points(self, phi):
        cx, cy = self.center
        if self.kind == "disk":
            r = np.full_like(phi, self.params[0])
            return np.column_stack((cx + r * np.cos(phi), cy + r * np.sin(phi)))
        if self.kind == "ellipse":
            a, b = self.params
            return np.column_stack((cx + a * np.cos(phi), cy + b * np.sin(phi)))
        r = self.radius(phi)
        return np.column_stack((cx + r * np.cos(phi), cy + r * np.sin(phi)))

    def curve(self, samples: int | None = None) -> MarkerCurve:
        """Markers equally spaced in arc length."""
        n = self.samples if samples is None else int(samples)
        if self.kind == "polygon":
            from .io import read_polygon

            return MarkerCurve(read_polygon(self.path)).resampled(n)
        if self.kind == "disk":
            return MarkerCurve(self._polar_points(2 * math.pi * np.arange(n) / n))
        fine = np.linspace(0.0, 2 * math.pi, 64 * n + 1)
        q = self._polar_points(fine)
        seg = np.hypot(*np.diff(q, axis=0).T)
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        target = np.linspace(0.0, cum[-1], n + 1)[:-1]
        phi = np.interp(target, cum, fine)
        return MarkerCurve(self._polar_points(phi))

    def region(self) -> "ShapeRegion":
        return ShapeRegion(self)

    @property
    def shrink_time(self) -> float:
        """Extinction time Area / 2 of the flow with the exact mobility."""
        return 0.5 * self.area


class ShapeRegion(Region):
    """Closed interior of a ShapeSpec with exact membership tests."""

    def __init__(self, spec: ShapeSpec, samples: int = 2048):
        self.spec = spec
        self._samples = samples
        self._poly = None

    @property
    def polygon(self) -> PolygonRegion:
        if self._poly is None:
            self._poly = PolygonRegion(self.spec.curve(max(self._samples, self.spec.samples)))
        return self._poly

    def bbox(self):
        return tuple(float(v) for v in self.spec.bbox())

    def contains(self, x, y):
        s = self.spec
        x = np.asarray(x, float) - s.center[0]
        y = np.asarray(y, float) - s.center[1]
        if s.kind == "disk":
            return x * x + y * y <= s.params[0] ** 2
        if s.kind == "ellipse":
            a, b = s.params
            return (x / a) ** 2 + (y / b) ** 2 <= 1.0
        if s.kind == "star":
            return np.hypot(x, y) <= s.radius(np.arctan2(y, x))
        return self.polygon.contains(x + s.center[0], y + s.center[1])

    def boundary_distance(self, x, y):
        return self.polygon.boundary_distance(x, y)

    @property
    def area(self) -> float:
        return self.spec.area

    def __repr__(self):
        return f"ShapeRegion({self.spec})"
