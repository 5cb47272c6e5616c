"""Matched deterministic and stochastic runs.

For every lattice scale L and seed the droplet is started from the
lattice points of the shape, advanced to the microscopic times t_j L^2
and compared with the flowed domain at diffusive time t_j.  Two
inclusions are checked per checkpoint::

    eroded domain  inside  droplet      ("inner")
    droplet        inside  dilated domain ("outer")

After the extinction time the flowed domain is the point X, so the inner
test is vacuous and the outer one asks the droplet to sit in the
eta-ball around X.  The run then continues to the death time of the
droplet.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import anisotropy as an
from .flow import Trajectory, run_to_shrink
from .geometry import Region, dilate_erode, hausdorff, inclusion_check
from .glauber import RngStream, SimulationTimeout, advance, death_time, droplet, init_from_region
from .shapes import ShapeSpec

DEFAULT_THRESHOLD = 7 / 8


@dataclass(frozen=True)
class ExperimentPlan:
    """Shape, lattice scales, seeds and checkpoints of one comparison experiment.

    ``checkpoints`` are diffusive times.  Every seed is used at every L;
    the random stream of a replica is keyed by (seed, L).
    """

    shape: ShapeSpec
    L: tuple[int, ...]
    seeds: tuple[int, ...]
    eta: float
    checkpoints: tuple[float, ...] = ()
    profile: an.AnisotropyProfile = field(default_factory=an.AnisotropyProfile.exact)
    flow_n: int = 1024
    margin: int = 8
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "L", tuple(int(v) for v in self.L))
        object.__setattr__(self, "seeds", tuple(int(v) for v in self.seeds))
        object.__setattr__(self, "checkpoints", tuple(float(v) for v in self.checkpoints))
        object.__setattr__(self, "eta", float(self.eta))
        self.validate()

    def validate(self) -> None:
        if not self.L:
            raise ValueError("plan needs at least one lattice scale L")
        if min(self.L) < 16:
            raise ValueError(f"every L must be at least 16, got {min(self.L)}")
        if not self.seeds:
            raise ValueError("plan needs at least one seed")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        cp = self.checkpoints
        if any(t < 0 for t in cp):
            raise ValueError("checkpoints must be nonnegative")
        if list(cp) != sorted(cp):
            raise ValueError("checkpoints must be sorted")
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must lie in (0, 1]")

    @classmethod
    def with_fractions(cls, shape: ShapeSpec, L, seeds, eta, fractions, **kw) -> "ExperimentPlan":
        """Checkpoints given as fractions of the extinction time."""
        profile = kw.get("profile", an.AnisotropyProfile.exact())
        T = shape.area / an.total_integral(profile)
        return cls(shape, tuple(L), tuple(seeds), eta, tuple(f * T for f in fractions), **kw)

    @property
    def T(self) -> float:
        """Extinction time Area / integral of a."""
        return self.shape.area / an.total_integral(self.profile)

    def config(self) -> dict:
        return {
            "shape": str(self.shape),
            "shape.center": self.shape.center,
            "L": self.L,
            "seeds": self.seeds,
            "eta": self.eta,
            "checkpoints": self.checkpoints,
            "anisotropy": self.profile.describe(),
            "flow.n": self.flow_n,
            "margin": self.margin,
            "threshold": self.threshold,
        }

    def config_hash(self) -> str:
        text = json.dumps(self.config(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass
class CheckpointRow:
    L: int
    seed: int
    t: float
    n_minus: int
    hausdorff: float
    inner: bool
    outer: bool
    inner_excess: float
    outer_excess: float
    resolution: float
    status: str = "ok"

    @property
    def sandwich(self) -> bool:
        return self.inner and self.outer


@dataclass
class DeathRow:
    L: int
    seed: int
    death: float
    status: str = "ok"


def compare_at(dom: Region, drop: Region, eta: float, L: int, seed: int, t: float, n_minus: int) -> CheckpointRow:
    """Hausdorff distance and both sandwich inclusions at one checkpoint."""
    inner = inclusion_check(dilate_erode(dom, -eta), drop)
    outer = inclusion_check(drop, dom, eta)
    if drop.is_empty() or dom.is_empty():
        d = math.nan
    else:
        d = hausdorff(drop, dom)
    return CheckpointRow(L, seed, t, n_minus, d, inner.holds, outer.holds,
                         inner.excess, outer.excess, max(inner.resolution, outer.resolution))


def _replica(args):
    plan, traj, L, seed, keep = args
    rng = RngStream(seed, stream=L)
    lat = init_from_region(L, plan.shape.region(), plan.margin)
    rows, kept = [], {}
    for j, t in enumerate(plan.checkpoints):
        advance(lat, rng, t * L * L)
        drop = droplet(lat)
        rows.append(compare_at(traj.domain(t), drop, plan.eta, L, seed, t, lat.n_minus))
        if keep:
            kept[(L, seed, j)] = drop
    try:
        d = DeathRow(L, seed, death_time(lat, rng) / L**2)
    except SimulationTimeout as exc:
        d = DeathRow(L, seed, math.nan, f"timeout: {exc}")
    return rows, d, kept


@dataclass
class ComparisonReport:
    plan: ExperimentPlan
    rows: list[CheckpointRow]
    deaths: list[DeathRow]
    flow: dict = field(default_factory=dict)
    trajectory: Trajectory | None = field(default=None, repr=False)
    droplets: dict = field(default_factory=dict, repr=False)

    # ------------------------------------------------------------- aggregates
    def seed_passes(self, L: int) -> dict[int, bool]:
        """A replica passes when both inclusions hold at every checkpoint."""
        out = {s: True for s in self.plan.seeds}
        for r in self.rows:
            if r.L == L:
                out[r.seed] = out[r.seed] and r.sandwich and r.status == "ok"
        return out

    def pass_fraction(self, L: int) -> float:
        p = self.seed_passes(L)
        return sum(p.values()) / len(p)

    def mean_hausdorff(self, L: int) -> float:
        """Mean over seeds of the largest Hausdorff distance over checkpoints."""
        per_seed = {}
        for r in self.rows:
            if r.L == L and not math.isnan(r.hausdorff):
                per_seed[r.seed] = max(per_seed.get(r.seed, 0.0), r.hausdorff)
        return float(np.mean(list(per_seed.values()))) if per_seed else math.nan

    def death_stats(self, L: int) -> tuple[float, float]:
        """Mean of death/L^2 and its 95% normal half-width."""
        d = np.array([r.death for r in self.deaths if r.L == L and r.status == "ok"])
        if len(d) == 0:
            return math.nan, math.nan
        hw = 1.96 * d.std(ddof=1) / math.sqrt(len(d)) if len(d) > 1 else math.nan
        return float(d.mean()), float(hw)

    def aggregates(self) -> list[dict]:
        out = []
        for L in self.plan.L:
            m, hw = self.death_stats(L)
            out.append({
                "L": L,
                "pass_fraction": self.pass_fraction(L),
                "mean_hausdorff": self.mean_hausdorff(L),
                "death_mean": m,
                "death_halfwidth": hw,
                "death_error": abs(m - self.plan.T),
            })
        return out

    def summary(self) -> dict:
        import numba
        import scipy

        return {
            "config": _jsonable(self.plan.config()),
            "config_hash": self.plan.config_hash(),
            "T": self.plan.T,
            "aggregates": _jsonable(self.aggregates()),
            "flow": _jsonable(self.flow),
            "versions": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "numba": numba.__version__,
            },
        }

    # ------------------------------------------------------------------ files
    CSV_COLUMNS = ("kind", "L", "seed", "t", "n_minus", "hausdorff", "inner", "outer",
                   "inner_excess", "outer_excess", "resolution", "death", "status")

    def csv_text(self) -> str:
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            w.writerow(["checkpoint", r.L, r.seed, repr(r.t), r.n_minus, repr(r.hausdorff), int(r.inner),
                        int(r.outer), repr(r.inner_excess), repr(r.outer_excess), repr(r.resolution), "", r.status])
        for d in self.deaths:
            w.writerow(["death", d.L, d.seed, "", "", "", "", "", "", "", "", repr(d.death), d.status])
        return buf.getvalue()

    def paths(self, outdir) -> tuple[Path, Path]:
        h = self.plan.config_hash()
        outdir = Path(outdir)
        return outdir / f"report-{h}.csv", outdir / f"summary-{h}.json"

    def write(self, outdir) -> tuple[Path, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = self.paths(outdir)
        csv_path.write_text(self.csv_text())
        json_path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path

    @classmethod
    def from_csv(cls, plan: ExperimentPlan, path, flow: dict | None = None) -> "ComparisonReport":
        rows, deaths = [], []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                if rec["kind"] == "checkpoint":
                    rows.append(CheckpointRow(
                        int(rec["L"]), int(rec["seed"]), float(rec["t"]), int(rec["n_minus"]),
                        float(rec["hausdorff"]), rec["inner"] == "1", rec["outer"] == "1",
                        float(rec["inner_excess"]), float(rec["outer_excess"]), float(rec["resolution"]),
                        rec["status"]))
                else:
                    deaths.append(DeathRow(int(rec["L"]), int(rec["seed"]), float(rec["death"]), rec["status"]))
        return cls(plan, rows, deaths, flow or {})


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def flow_for(plan: ExperimentPlan) -> Trajectory:
    """The deterministic trajectory shared by all replicas of a plan."""
    return run_to_shrink(plan.shape, plan.profile, n=plan.flow_n, checkpoints=plan.checkpoints)


def run_experiment(plan: ExperimentPlan, trajectory: Trajectory | None = None, workers: int = 1,
                   keep_droplets: bool = False) -> ComparisonReport:
    """Run every (L, seed) replica of the plan and collect the comparison rows.

    Replicas are independent; with ``workers > 1`` they run in separate
    processes.  Rows are ordered by (L, seed, t) either way, so the
    report does not depend on the worker count.  With ``keep_droplets``
    the droplet at every checkpoint is kept in ``report.droplets`` keyed
    by (L, seed, checkpoint index).
    """
    traj = flow_for(plan) if trajectory is None else trajectory
    jobs = [(plan, traj, L, s, keep_droplets) for L in plan.L for s in plan.seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_replica, jobs))
    else:
        results = [_replica(j) for j in jobs]
    rows = [r for rs, _, _ in results for r in rs]
    deaths = [d for _, d, _ in results]
    kept = {k: v for _, _, ks in results for k, v in ks.items()}
    return ComparisonReport(plan, rows, deaths, dict(traj.metadata), traj, kept)


@dataclass
class ConvergenceRow:
    L: int
    mean_hausdorff: float
    death_error: float
    pass_fraction: float


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]
    monotone: bool

    def format(self) -> str:
        lines = [f"{'L':>6} {'hausdorff':>11} {'death_err':>11} {'pass':>6}"]
        for r in self.rows:
            lines.append(f"{r.L:>6} {r.mean_hausdorff:>11.5f} {r.death_error:>11.5f} {r.pass_fraction:>6.3f}")
        lines.append(f"hausdorff decreasing in L: {'yes' if self.monotone else 'no'}")
        return "\n".join(lines)


def convergence_table(report: ComparisonReport) -> ConvergenceTable:
    """One row per L: mean worst-checkpoint Hausdorff distance and death-time error."""
    Ls = sorted(set(report.plan.L))
    if len(Ls) < 2:
        raise ValueError("a convergence table needs at least two lattice scales")
    agg = {a["L"]: a for a in report.aggregates()}
    rows = [ConvergenceRow(L, agg[L]["mean_hausdorff"], agg[L]["death_error"], agg[L]["pass_fraction"]) for L in Ls]
    h = [r.mean_hausdorff for r in rows]
    monotone = all(b < a for a, b in zip(h, h[1:])) if not any(math.isnan(v) for v in h) else False
    return ConvergenceTable(rows, monotone)


def pass_fraction_nondecreasing(report: ComparisonReport) -> bool:
    p = [report.pass_fraction(L) for L in sorted(set(report.plan.L))]
    return all(b >= a for a, b in zip(p, p[1:]))
