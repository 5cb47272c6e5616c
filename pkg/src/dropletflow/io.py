"""Plain-text file formats.

Curve snapshot::

    N t
    x y theta k        (N lines)

Cell union::

    L
    i j                (one line per -1 site, sorted)

Key-value files (metadata, configs) hold one ``key = value`` per line;
``#`` starts a comment.  Floats are written with ``repr`` so every format
round-trips bit for bit.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import CellRegion, MarkerCurve


def _f(v: float) -> str:
    return repr(float(v))


def write_curve_snapshot(path, curve: MarkerCurve, t: float) -> Path:
    path = Path(path)
    lines = [f"{len(curve)} {_f(t)}"]
    th, k = curve.theta, curve.curvature
    for (x, y), a, c in zip(curve.points, th, k):
        lines.append(f"{_f(x)} {_f(y)} {_f(a)} {_f(c)}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_curve_snapshot(path) -> tuple[MarkerCurve, float]:
    text = Path(path).read_text().split("\n")
    head = text[0].split()
    n, t = int(head[0]), float(head[1])
    rows = np.array([[float(v) for v in line.split()] for line in text[1:1 + n]])
    if rows.shape != (n, 4):
        raise ValueError(f"{path}: expected {n} rows of 'x y theta k'")
    return MarkerCurve(rows[:, :2], theta=rows[:, 2], check_simple=False), t


def read_polygon(path) -> np.ndarray:
    """Read vertices from ``x y`` lines or from a curve snapshot."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if len(lines[0]) == 2 and len(lines) > 1 and len(lines[1]) == 4:
        lines = lines[1:]
    return np.array([[float(r[0]), float(r[1])] for r in lines])


def write_cells(path, region: CellRegion) -> Path:
    path = Path(path)
    lines = [str(region.L)] + [f"{i} {j}" for i, j in region.cells]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_cells(path) -> CellRegion:
    lines = Path(path).read_text().split("\n")
    L = int(lines[0])
    cells = [tuple(int(v) for v in ln.split()) for ln in lines[1:] if ln.strip()]
    return CellRegion(L, np.array(cells, dtype=np.int64).reshape(-1, 2))


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(format_value(x) for x in v)
    return str(v)


def write_keyvalue(path, items: dict) -> Path:
    path = Path(path)
    path.write_text("".join(f"{k} = {format_value(v)}\n" for k, v in items.items()))
    return path


def read_keyvalue(path) -> dict[str, str]:
    out: dict[str, str] = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out
