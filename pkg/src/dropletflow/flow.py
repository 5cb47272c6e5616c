"""Anisotropic curve-shortening flow  d gamma / dt = a(theta) k N  on marker curves.

The scheme is explicit: every marker moves by ``dt * a(theta) * k`` along
the inward normal, after which the markers are redistributed uniformly in
arc length whenever adjacent spacings drift apart by more than a factor
``resample_ratio``.  Steps that make the curve self-intersect or lengthen
are rejected and retried as two half steps.

Because the exact mobility has kinks at multiples of pi/2, the stepper
always uses a mollified mobility (see ``anisotropy.stepping_profile``).
The enclosed area then decays at the exact rate ``total_integral(profile)``,
which is used as an accuracy monitor and to extrapolate the extinction
time once the curve becomes too small to resolve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.linalg import solve_banded

from . import anisotropy as an
from .geometry import (
    DegenerateCurveError,
    MarkerCurve,
    PointRegion,
    PolygonRegion,
    Region,
    hausdorff,
)
from .shapes import ShapeSpec

C_STAB = 0.4
MAX_HALVINGS = 20
INFLECTION_BAND = 0.05


class FlowFailure(RuntimeError):
    """Raised when a step cannot be completed; carries the last valid state."""

    def __init__(self, message: str, state: "FlowState"):
        super().__init__(message)
        self.state = state


def inflection_count(k: np.ndarray, band: float = INFLECTION_BAND) -> int:
    """Sign changes of the curvature around the closed curve.

    Markers with |k| below ``band * max|k|`` are ignored, so near-flat
    stretches do not register spurious inflections.
    """
    kmax = np.max(np.abs(k))
    if kmax == 0:
        return 0
    s = np.sign(k[np.abs(k) >= band * kmax])
    if len(s) < 2:
        return 0
    return int(np.count_nonzero(s != np.roll(s, 1)))


@dataclass(frozen=True)
class FlowState:
    curve: MarkerCurve
    t: float
    profile: an.AnisotropyProfile
    status: str = "running"
    center: tuple[float, float] | None = None
    T_observed: float | None = None

    @property
    def running(self) -> bool:
        return self.status == "running"

    @cached_property
    def velocity(self) -> np.ndarray:
        """Normal speed a(theta) k at each marker (g in the flow equations)."""
        return self.profile(self.curve.theta) * self.curve.curvature

    @property
    def area(self) -> float:
        return self.curve.area

    @property
    def length(self) -> float:
        return self.curve.length

    @property
    def kmax(self) -> float:
        return float(np.max(np.abs(self.curve.curvature)))

    @property
    def gmax(self) -> float:
        return float(np.max(np.abs(self.velocity)))

    @property
    def inflections(self) -> int:
        return inflection_count(self.curve.curvature)


def initial_state(curve: MarkerCurve, profile: an.AnisotropyProfile, t: float = 0.0) -> FlowState:
    return FlowState(curve, float(t), an.stepping_profile(profile, len(curve)))


def stable_dt(state: FlowState, c_stab: float = C_STAB) -> float:
    """Largest explicit step: c_stab * (min ds)^2 / a_max."""
    a_max = _a_max(state.profile)
    return c_stab * float(np.min(state.curve.edge_lengths)) ** 2 / a_max


_A_MAX_CACHE: dict = {}


def _a_max(profile: an.AnisotropyProfile) -> float:
    if profile not in _A_MAX_CACHE:
        _A_MAX_CACHE[profile] = profile.bounds[1]
    return _A_MAX_CACHE[profile]


def _try_step(state: FlowState, dt: float, resample_ratio: float) -> FlowState | None:
    c = state.curve
    pts = c.points + (dt * state.velocity)[:, None] * c.normals
    try:
        new = MarkerCurve(pts, check_simple=False)
        h = new.edge_lengths
        if h.max() > resample_ratio * h.min():
            new = new.resampled()
        new.curvature  # noqa: B018  (raises on folded markers)
    except DegenerateCurveError:
        return None
    if not new.is_simple() or new.length > c.length:
        return None
    return FlowState(new, state.t + dt, state.profile)


def _advance(state: FlowState, dt: float, depth: int, resample_ratio: float) -> FlowState:
    new = _try_step(state, dt, resample_ratio)
    if new is not None:
        return new
    if depth >= MAX_HALVINGS:
        raise FlowFailure(f"step rejected after {MAX_HALVINGS} halvings at t={state.t!r}", state)
    half = _advance(state, 0.5 * dt, depth + 1, resample_ratio)
    return _advance(half, 0.5 * dt, depth + 1, resample_ratio)


def step(state: FlowState, dt: float, *, resample_ratio: float = 1.5, c_stab: float = C_STAB) -> FlowState:
    """Advance the curve by ``dt``.

    ``dt`` must respect the explicit stability bound ``stable_dt``; a
    rejected step is retried as two half steps, at most 20 levels deep.
    """
    if dt == 0:
        return state
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if not state.running:
        raise ValueError("cannot step a curve that has shrunk to a point")
    bound = stable_dt(state, c_stab)
    if dt > bound * (1 + 1e-9):
        raise ValueError(f"dt={dt:.3g} exceeds the stability bound {bound:.3g}")
    return _advance(state, dt, 0, resample_ratio)


def evolve_states(state: FlowState, t_end: float, *, c_stab: float = C_STAB,
                  resample_ratio: float = 1.5) -> list[FlowState]:
    """Every accepted state from ``state`` up to exactly ``t_end``."""
    out = [state]
    while state.t < t_end:
        dt = min(stable_dt(state, c_stab), t_end - state.t)
        state = _advance(state, dt, 0, resample_ratio)
        out.append(state)
    out[-1] = replace(out[-1], t=t_end)
    return out


@dataclass
class Trajectory:
    """Output of :func:`run_to_shrink`."""

    snapshots: list[FlowState]
    monitors: dict[str, np.ndarray]
    profile: an.AnisotropyProfile
    stepping_profile: an.AnisotropyProfile
    center: tuple[float, float]
    T_observed: float
    t_stop: float
    n_markers: int
    steps: int
    metadata: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def at(self, t: float) -> FlowState:
        return interpolate_state(self, t)

    def domain(self, t: float) -> Region:
        """The flowed domain at time t; the point X once the curve has shrunk."""
        if t >= self.t_stop:
            return PointRegion(*self.center)
        return snapshot_domain(self.at(t))


def run_to_shrink(
    spec: ShapeSpec | MarkerCurve,
    profile: an.AnisotropyProfile,
    *,
    n: int | None = None,
    checkpoints=(),
    snapshot_every: float | None = None,
    c_stab: float = C_STAB,
    resample_ratio: float = 1.5,
    coarsen: bool = True,
    min_markers: int = 64,
    area_fraction: float = 1e-4,
    diameter_factor: float = 4.0,
    max_steps: int = 10_000_000,
) -> Trajectory:
    """Integrate until the curve shrinks to a point.

    Snapshots are stored at t = 0, at every requested checkpoint time (hit
    exactly) and every ``snapshot_every`` time units.  The run stops once
    the area falls below ``area_fraction`` of the initial area or the
    diameter below ``diameter_factor`` initial marker spacings; the
    extinction time is then extrapolated with the exact area rate.

    With ``coarsen`` the marker count is halved (down to ``min_markers``)
    each time the mean spacing falls below half the initial spacing, which
    keeps the explicit time step from collapsing as the curve shrinks.
    """
    if isinstance(spec, ShapeSpec):
        curve = spec.curve(n)
    else:
        curve = spec if n is None or n == len(spec) else spec.resampled(n)
    state = initial_state(curve, profile)
    rate = an.total_integral(state.profile)
    a0 = state.area
    s0 = state.length / len(curve)
    d_stop = diameter_factor * s0

    targets = sorted({float(t) for t in checkpoints if t > 0})
    if snapshot_every:
        horizon = a0 / rate
        targets = sorted(set(targets) | set(np.arange(1, int(horizon / snapshot_every) + 1) * snapshot_every))
    targets_iter = iter(targets)
    next_target = next(targets_iter, None)

    snapshots = [state]
    mon = {k: [] for k in ("t", "area", "length", "kmax", "gmax", "inflections", "n")}

    def record(s: FlowState):
        mon["t"].append(s.t)
        mon["area"].append(s.area)
        mon["length"].append(s.length)
        mon["kmax"].append(s.kmax)
        mon["gmax"].append(s.gmax)
        mon["inflections"].append(s.inflections)
        mon["n"].append(len(s.curve))

    steps = 0
    while True:
        record(state)
        if state.area < area_fraction * a0:
            break
        x0, y0, x1, y1 = state.curve.bbox
        if max(x1 - x0, y1 - y0) < d_stop and state.curve.diameter < d_stop:
            break
        if steps >= max_steps:
            raise FlowFailure(f"no shrink after {max_steps} steps", state)
        if coarsen and len(state.curve) > min_markers and state.length / len(state.curve) < 0.5 * s0:
            m = max(min_markers, len(state.curve) // 2)
            state = FlowState(state.curve.resampled(m), state.t, state.profile)
        dt = stable_dt(state, c_stab)
        hit = next_target is not None and state.t + dt >= next_target
        if hit:
            dt = next_target - state.t
        state = _advance(state, dt, 0, resample_ratio) if dt > 0 else state
        steps += 1
        if hit:
            state = replace(state, t=next_target)
            snapshots.append(state)
            next_target = next(targets_iter, None)

    X = tuple(float(v) for v in state.curve.centroid)
    T_obs = state.t + state.area / rate
    final = replace(state, status="shrunk", center=X, T_observed=T_obs)
    if snapshots[-1] is not state:
        snapshots.append(final)
    else:
        snapshots[-1] = final
    monitors = {k: np.asarray(v) for k, v in mon.items()}
    return Trajectory(
        snapshots=snapshots,
        monitors=monitors,
        profile=profile,
        stepping_profile=state.profile,
        center=X,
        T_observed=T_obs,
        t_stop=state.t,
        n_markers=len(curve),
        steps=steps,
        metadata={
            "profile": profile.describe(),
            "stepping_profile": state.profile.describe(),
            "omega": state.profile.omega,
            "n": len(curve),
            "dt_policy": f"c_stab*min_ds^2/a_max, c_stab={c_stab!r}",
            "resample_ratio": resample_ratio,
            "steps": steps,
            "t_stop": state.t,
            "T_observed": T_obs,
            "X": X,
        },
    )


def snapshot_domain(state: FlowState) -> Region:
    """Polygon enclosed by a running curve, or the point X after shrinking."""
    if state.running:
        return PolygonRegion(state.curve)
    return PointRegion(*state.center)


def _align_shift(a: np.ndarray, b: np.ndarray) -> int:
    """Cyclic shift of b that best matches a (least squares)."""
    # |a - roll(b, s)|^2 is minimized where the circular cross-correlation peaks
    fa = np.fft.fft(a[:, 0] + 1j * a[:, 1])
    fb = np.fft.fft(b[:, 0] + 1j * b[:, 1])
    corr = np.fft.ifft(fa * np.conj(fb)).real
    return int(np.argmax(corr))


def interpolate_state(traj: Trajectory, t: float) -> FlowState:
    """State at time t by linear blending of the bracketing snapshots.

    Stored times are reproduced exactly.  In between, the later snapshot is
    resampled to the marker count of the earlier one and cyclically
    shifted to best match it before the positions are blended.
    """
    times = traj.times
    if t <= times[0]:
        return traj.snapshots[0]
    j = int(np.searchsorted(times, t))
    if j < len(times) and times[j] == t:
        return traj.snapshots[j]
    if j >= len(times):
        return traj.snapshots[-1]
    s0, s1 = traj.snapshots[j - 1], traj.snapshots[j]
    if not s1.running:
        return s0 if t < traj.t_stop else s1
    a = s0.curve.points
    c1 = s1.curve if len(s1.curve) == len(a) else s1.curve.resampled(len(a))
    b = np.roll(c1.points, _align_shift(a, c1.points), axis=0)
    w = (t - s0.t) / (s1.t - s0.t)
    return FlowState(MarkerCurve((1 - w) * a + w * b, check_simple=False), float(t), s0.profile)


# ----------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class BoundVerdict:
    holds: bool
    first_violation: tuple[float, float, float] | None = None  # (t, gmax, bound)
    checked: int = 0

    def __bool__(self):
        return self.holds


def gmax_bound(g0: float, t, a_min: float):
    """Solution of d G/dt = G^3 / a_min from G(0) = g0; inf past blow-up."""
    t = np.asarray(t, dtype=float)
    den = g0 ** -2 - 2.0 * t / a_min
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, 1.0 / np.sqrt(np.where(den > 0, den, 1.0)), np.inf)


def gmax_bound_check(traj: Trajectory, slack: float = 0.05) -> BoundVerdict:
    """Check max|a k| against the cubic ODE comparison bound at every recorded time."""
    t = traj.monitors["t"]
    g = traj.monitors["gmax"]
    a_min = traj.stepping_profile.bounds[0]
    bound = gmax_bound(g[0], t, a_min)
    finite = np.isfinite(bound)
    bad = finite & (g > bound * (1 + slack))
    if bad.any():
        i = int(np.argmax(bad))
        return BoundVerdict(False, (float(t[i]), float(g[i]), float(bound[i])), int(finite.sum()))
    return BoundVerdict(True, None, int(finite.sum()))


def convexity_preserved(traj: Trajectory, tol_fraction: float = 1e-3) -> bool:
    """For an initially convex curve, curvature stays above -tol * max k."""
    first = traj.snapshots[0].curve.curvature
    if np.any(first <= 0):
        raise ValueError("initial curve is not convex")
    for s in traj.snapshots:
        if not s.running:
            continue
        k = s.curve.curvature
        if np.any(k < -tol_fraction * np.max(k)):
            return False
    return True


@dataclass(frozen=True)
class Arc:
    sign: int
    start: int
    stop: int  # exclusive, may exceed N (wraps)
    theta_lo: float
    theta_hi: float
    polar_angle: float  # direction of the arc midpoint seen from the centroid


def curvature_arcs(curve: MarkerCurve, band: float = INFLECTION_BAND) -> list[Arc]:
    """Maximal arcs of constant curvature sign between inflections.

    Sign runs whose peak |k| stays below ``band * max|k|`` are absorbed
    into their neighbours.  Returns an empty list for curves without
    inflections.
    """
    k = curve.curvature
    n = len(k)
    kmax = np.max(np.abs(k))
    sig = np.where(np.abs(k) >= band * kmax, np.sign(k), 0).astype(int)
    if not np.any(sig > 0) or not np.any(sig < 0):
        return []
    # fill weak markers with the sign of the previous strong one
    start = int(np.nonzero(sig)[0][0])
    order = (start + np.arange(n)) % n
    filled = sig[order].copy()
    for i in range(1, n):
        if filled[i] == 0:
            filled[i] = filled[i - 1]
    # runs in rotated order, then back to original indices
    change = np.nonzero(filled != np.roll(filled, 1))[0]
    theta = curve.theta
    centroid = curve.centroid
    p = curve.points
    arcs = []
    for a, b in zip(change, np.append(change[1:], change[0] + n)):
        idx = order[np.arange(a, b) % n]
        th = theta[idx].copy()
        # keep angles continuous across the wrap of the marker index
        th = np.unwrap(th)
        mid = p[idx[len(idx) // 2]] - centroid
        arcs.append(Arc(int(filled[a]), int(order[a]), int(order[a]) + (b - a),
                        float(th.min()), float(th.max()), float(math.atan2(mid[1], mid[0]))))
    return arcs


def angle_span_nesting(traj: Trajectory, tol: float | None = None, sign: int = 1) -> bool:
    """Tangent-angle intervals of curvature arcs shrink (nest) along the trajectory.

    Arcs are matched between consecutive snapshots by the polar angle of
    their midpoints.  Snapshots between which the number of arcs changes
    (inflections annihilating) are not compared.  ``tol`` defaults to twice the largest turning angle
    between adjacent markers, the resolution at which an inflection can
    be located.
    """
    prev, prev_count = None, None
    for s in traj.snapshots:
        if not s.running:
            break
        every = curvature_arcs(s.curve)
        arcs = [a for a in every if a.sign == sign]
        if not arcs:
            break
        tl = tol if tol is not None else 2 * float(np.max(np.abs(s.curve.turning)))
        # arcs merge when inflections annihilate; nesting holds between such events
        if prev is not None and len(every) == prev_count:
            for a in arcs:
                d = [abs(math.remainder(a.polar_angle - b.polar_angle, 2 * math.pi)) for b in prev]
                b = prev[int(np.argmin(d))]
                shift = 2 * math.pi * round(((b.theta_lo + b.theta_hi) - (a.theta_lo + a.theta_hi)) / (4 * math.pi))
                if a.theta_lo + shift < b.theta_lo - tl or a.theta_hi + shift > b.theta_hi + tl:
                    return False
        prev, prev_count = arcs, len(every)
    return True


def inflections_nonincreasing(traj: Trajectory) -> bool:
    c = traj.monitors["inflections"]
    return bool(np.all(np.diff(c) <= 0))


def trajectory_drift(a: Trajectory, b: Trajectory, times, h: float | None = None) -> float:
    """Largest Hausdorff distance between two trajectories at the given times."""
    return max(hausdorff(a.domain(t), b.domain(t), h) for t in times)


# ----------------------------------------------------------- heat chart

HEAT_FRAMES = tuple(k * math.pi / 4 for k in (1, 3, 5, 7))


def _graph_in_frame(curve: MarkerCurve, theta0: float, x_lo: float, x_hi: float):
    """Rotated-frame graph (x, y) of the arc whose slope stays in [-1, 1]."""
    c, s = math.cos(theta0), math.sin(theta0)
    p = curve.points
    xr = p[:, 0] * c + p[:, 1] * s
    yr = -p[:, 0] * s + p[:, 1] * c
    rel = np.array([math.remainder(v, 2 * math.pi) for v in curve.theta - theta0])
    ok = np.abs(rel) <= math.pi / 4
    n = len(p)
    best = None
    # contiguous runs of admissible markers (cyclic)
    if ok.all():
        runs = [np.arange(n)]
    else:
        start = int(np.nonzero(~ok)[0][0])
        order = (start + np.arange(n)) % n
        runs, cur = [], []
        for i in order:
            if ok[i]:
                cur.append(i)
            elif cur:
                runs.append(np.array(cur))
                cur = []
        if cur:
            runs.append(np.array(cur))
    for r in runs:
        if len(r) < 3:
            continue
        x = xr[r]
        if x[0] <= x_lo and x[-1] >= x_hi and np.all(np.diff(x) > 0):
            best = r
            break
    if best is None:
        return None
    return xr[best], yr[best]


@dataclass(frozen=True)
class HeatChartResult:
    deviation: float
    x: np.ndarray
    y_heat: np.ndarray
    y_flow: np.ndarray


def heat_chart_check(states, theta0: float, window: tuple[float, float], nx: int = 201,
                     diffusivity: float = 0.25) -> HeatChartResult:
    """Compare the flow with the heat equation y_t = y_xx / 4 in a rotated frame.

    ``states`` is a time-ordered sequence of flow states.  In the frame
    rotated by ``theta0`` the boundary portion over ``window`` must be the
    graph of a 1-Lipschitz function at every state.  The heat equation is
    solved with Crank-Nicolson from the first state's graph, with the
    flow's graph values imposed at the window ends, and compared with the
    last state's graph in the sup norm over interior nodes.  Passing
    another ``diffusivity`` is only useful as a negative control.
    """
    states = list(states)
    if len(states) < 2:
        raise ValueError("need at least two states")
    if states[0].profile.kind == "constant":
        raise ValueError("the heat-equation chart requires the Ising mobility (exact or mollified)")
    if not any(abs(math.remainder(theta0 - f, 2 * math.pi)) < 1e-12 for f in HEAT_FRAMES):
        raise ValueError("theta0 must be an odd multiple of pi/4")
    x_lo, x_hi = window
    x = np.linspace(x_lo, x_hi, nx)
    graphs = []
    for s in states:
        g = _graph_in_frame(s.curve, theta0, x_lo, x_hi)
        if g is None:
            raise ValueError(f"boundary is not a 1-Lipschitz graph over the window at t={s.t!r}")
        graphs.append(np.interp(x, *g))
    ts = np.array([s.t for s in states])
    left = np.array([g[0] for g in graphs])
    right = np.array([g[-1] for g in graphs])

    dx = x[1] - x[0]
    D = diffusivity
    y = graphs[0].copy()
    m = nx - 2
    for i in range(1, len(states)):
        dt = ts[i] - ts[i - 1]
        if dt <= 0:
            continue
        r = D * dt / dx**2
        ab = np.zeros((3, m))
        ab[0, 1:] = -0.5 * r
        ab[1, :] = 1 + r
        ab[2, :-1] = -0.5 * r
        rhs = y[1:-1] + 0.5 * r * (y[2:] - 2 * y[1:-1] + y[:-2])
        rhs[0] += 0.5 * r * left[i]
        rhs[-1] += 0.5 * r * right[i]
        y[1:-1] = solve_banded((1, 1), ab, rhs)
        y[0], y[-1] = left[i], right[i]
    dev = float(np.max(np.abs(y[1:-1] - graphs[-1][1:-1])))
    return HeatChartResult(dev, x, y, graphs[-1])
