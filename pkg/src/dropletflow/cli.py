"""Command-line front end.

Every command reads a flat ``key = value`` config file (``--config``),
applies flag overrides (flags win), validates the result, echoes the
fully resolved config into the output directory and only then runs.
Re-running the echoed config reproduces the outputs byte for byte.

Exit codes: 0 success, 2 config error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import anisotropy as an
from . import io
from .flow import FlowFailure, inflection_count, run_to_shrink
from .geometry import DegenerateCurveError, reach
from .glauber import MIN_L, RngStream, SimulationTimeout, advance, death_time, droplet, init_from_region
from .harness import ComparisonReport, ExperimentPlan, convergence_table, run_experiment
from .shapes import ShapeSpec

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str):
    return None if str(text).strip() in ("", "none") else float(text)


@dataclass(frozen=True)
class Key:
    parse: object
    default: str | None
    help: str


# default None means "no default": the key is required by commands that use it
KEYS: dict[str, Key] = {
    "out": Key(str, "out", "output directory"),
    "shape": Key(str, None, "disk:r | ellipse:a,b | star:R,eps,m | polygon:path"),
    "shape.center": Key(_floats, "0,0", "shape center x,y"),
    "anisotropy.kind": Key(str, "exact", "exact | mollified | constant"),
    "anisotropy.omega": Key(_opt_float, "none", "mollification width (mollified kind)"),
    "anisotropy.constant": Key(float, "1.0", "mobility of the constant kind"),
    "flow.n": Key(int, "512", "marker count (compare uses flow.n for the shared flow)"),
    "flow.snapshot_every": Key(_opt_float, "none", "extra snapshot spacing in diffusive time"),
    "checkpoints": Key(_floats, "", "diffusive checkpoint times, comma separated"),
    "checkpoint_fractions": Key(_floats, "", "checkpoints as fractions of the extinction time"),
    "L": Key(_ints, None, "lattice scale(s), comma separated"),
    "seed": Key(int, "0", "first seed"),
    "replicas": Key(int, "1", "number of seeds: seed, seed+1, ..."),
    "margin": Key(int, "8", "window margin in lattice sites"),
    "event_log": Key(_bool, "false", "write 't site old new' flip logs (glauber)"),
    "eta": Key(float, None, "sandwich margin (compare)"),
    "threshold": Key(float, "0.875", "pass-fraction threshold (compare)"),
    "workers": Key(int, "1", "replica worker processes (compare)"),
    "emit_plot_data": Key(_bool, "false", "write boundary polylines per checkpoint (compare)"),
    "report": Key(str, None, "report CSV to re-aggregate (report)"),
}

COMMAND_KEYS = {
    "shapes": ("out", "shape", "shape.center", "flow.n"),
    "flow": ("out", "shape", "shape.center", "anisotropy.kind", "anisotropy.omega", "anisotropy.constant",
             "flow.n", "flow.snapshot_every", "checkpoints"),
    "glauber": ("out", "shape", "shape.center", "L", "seed", "replicas", "checkpoints", "margin", "event_log"),
    "compare": ("out", "shape", "shape.center", "anisotropy.kind", "anisotropy.omega", "anisotropy.constant",
                "flow.n", "L", "seed", "replicas", "eta", "checkpoints", "checkpoint_fractions", "margin",
                "threshold", "workers", "emit_plot_data"),
    "report": ("out", "report"),
}

# per-command defaults that differ from KEYS
COMMAND_DEFAULTS = {"compare": {"flow.n": "1024"}}

FLAG_KEYS = {
    "shape": "shape", "center": "shape.center", "n": "flow.n", "anisotropy": "anisotropy.kind",
    "omega": "anisotropy.omega", "constant": "anisotropy.constant", "snapshot_every": "flow.snapshot_every",
    "checkpoints": "checkpoints", "fractions": "checkpoint_fractions", "L": "L", "seed": "seed",
    "replicas": "replicas", "margin": "margin", "eta": "eta", "threshold": "threshold",
    "workers": "workers", "out": "out", "report": "report",
}


def resolve_config(command: str, file_values: dict[str, str], overrides: dict[str, str]) -> dict:
    """Merge defaults, file values and overrides; parse and validate every key."""
    allowed = COMMAND_KEYS[command]
    raw: dict[str, str] = {}
    for source in (file_values, overrides):
        for k, v in source.items():
            if k not in KEYS:
                raise ConfigError(f"unknown config key {k!r}")
            if k not in allowed:
                raise ConfigError(f"config key {k!r} does not apply to the {command} command")
            raw[k] = str(v)
    cfg = {}
    for k in allowed:
        spec = KEYS[k]
        text = raw.get(k, COMMAND_DEFAULTS.get(command, {}).get(k, spec.default))
        if text is None:
            raise ConfigError(f"missing config key {k!r} ({spec.help})")
        try:
            cfg[k] = spec.parse(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {k!r}: {exc}") from None
    _validate(command, cfg)
    return cfg


def _validate(command: str, cfg: dict) -> None:
    if "shape" in cfg:
        center = cfg["shape.center"]
        if len(center) != 2:
            raise ConfigError("shape.center must be 'x,y'")
        try:
            cfg["_shape"] = ShapeSpec.parse(cfg["shape"], samples=cfg.get("flow.n", 512), center=center)
        except (ValueError, OSError) as exc:
            raise ConfigError(f"bad value for 'shape': {exc}") from None
    if "anisotropy.kind" in cfg:
        kind = cfg["anisotropy.kind"]
        if kind not in an.KINDS:
            raise ConfigError(f"bad value for 'anisotropy.kind': expected one of {an.KINDS}")
        try:
            cfg["_profile"] = an.from_config(kind, cfg["anisotropy.omega"], cfg["anisotropy.constant"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if "flow.n" in cfg and cfg["flow.n"] < 16:
        raise ConfigError("flow.n must be at least 16")
    if "L" in cfg:
        if not cfg["L"]:
            raise ConfigError("L list is empty")
        if min(cfg["L"]) < MIN_L:
            raise ConfigError(f"L must be at least {MIN_L}, got {min(cfg['L'])}")
        if command == "glauber" and len(cfg["L"]) != 1:
            raise ConfigError("glauber takes a single L")
    if "replicas" in cfg and cfg["replicas"] < 1:
        raise ConfigError("replicas must be at least 1")
    if "checkpoints" in cfg:
        cp = cfg["checkpoints"]
        if any(t < 0 for t in cp) or list(cp) != sorted(cp):
            raise ConfigError("checkpoints must be nonnegative and sorted")
    if command == "compare":
        if cfg["checkpoints"] and cfg["checkpoint_fractions"]:
            raise ConfigError("give either checkpoints or checkpoint_fractions, not both")
        if not cfg["eta"] > 0:
            raise ConfigError("eta must be positive")
        if cfg["workers"] < 1:
            raise ConfigError("workers must be at least 1")
        try:
            cfg["_plan"] = _plan(cfg)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _plan(cfg: dict) -> ExperimentPlan:
    seeds = tuple(range(cfg["seed"], cfg["seed"] + cfg["replicas"]))
    kw = dict(profile=cfg["_profile"], flow_n=cfg["flow.n"], margin=cfg["margin"], threshold=cfg["threshold"])
    if cfg["checkpoint_fractions"]:
        return ExperimentPlan.with_fractions(cfg["_shape"], cfg["L"], seeds, cfg["eta"], cfg["checkpoint_fractions"], **kw)
    return ExperimentPlan(cfg["_shape"], cfg["L"], seeds, cfg["eta"], cfg["checkpoints"], **kw)


def echo_config(command: str, cfg: dict, raw_text: dict[str, str]) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    items = {k: raw_text[k] for k in COMMAND_KEYS[command]}
    path = out / f"config-{command}.txt"
    path.write_text(f"# resolved config of the {command} command\n"
                    + "".join(f"{k} = {v}\n" for k, v in items.items()))
    return path


def _canonical(cfg: dict) -> dict[str, str]:
    out = {}
    for k, v in cfg.items():
        if k.startswith("_"):
            continue
        if v is None:
            out[k] = "none"
        else:
            out[k] = io.format_value(v)
    return out


# ---------------------------------------------------------------- commands


def cmd_shapes(cfg: dict) -> int:
    spec: ShapeSpec = cfg["_shape"]
    curve = spec.curve()
    out = Path(cfg["out"])
    path = io.write_curve_snapshot(out / "shape.txt", curve, 0.0)
    info = {
        "shape": str(spec),
        "samples": len(curve),
        "area": spec.area,
        "length": curve.length,
        "shrink_time": spec.shrink_time,
        "reach": reach(curve),
        "inflections": inflection_count(curve.curvature),
    }
    io.write_keyvalue(out / "shape-info.txt", info)
    for k, v in info.items():
        print(f"{k} = {io.format_value(v)}")
    print(f"wrote {path}")
    return 0


def cmd_flow(cfg: dict) -> int:
    out = Path(cfg["out"])
    try:
        traj = run_to_shrink(cfg["_shape"], cfg["_profile"], n=cfg["flow.n"],
                             checkpoints=cfg["checkpoints"], snapshot_every=cfg["flow.snapshot_every"])
    except FlowFailure as exc:
        path = io.write_curve_snapshot(out / "failure-state.txt", exc.state.curve, exc.state.t)
        print(f"flow solver failed: {exc}; last valid state in {path}", file=sys.stderr)
        return EXIT_RUNTIME
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    for old in snap_dir.glob("snap-*.txt"):
        old.unlink()
    for i, s in enumerate(traj.snapshots):
        io.write_curve_snapshot(snap_dir / f"snap-{i:04d}.txt", s.curve, s.t)
    meta = dict(traj.metadata)
    meta["shape"] = str(cfg["_shape"])
    meta["snapshots"] = len(traj.snapshots)
    meta["area_law_error"] = float(max(abs(traj.monitors["area"] - traj.monitors["area"][0]
                                           + an.total_integral(traj.stepping_profile) * traj.monitors["t"])))
    io.write_keyvalue(out / "metadata.txt", meta)
    print(f"T_observed = {traj.T_observed!r}")
    print(f"X = {traj.center[0]!r},{traj.center[1]!r}")
    print(f"wrote {len(traj.snapshots)} snapshots to {snap_dir}")
    return 0


def cmd_glauber(cfg: dict) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (L,) = cfg["L"]
    region = cfg["_shape"].region()
    deaths = {}
    for seed in range(cfg["seed"], cfg["seed"] + cfg["replicas"]):
        rng = RngStream(seed, stream=L)
        lat = init_from_region(L, region, cfg["margin"])
        log = (out / f"events-L{L}-seed{seed}.txt").open("w") if cfg["event_log"] else None
        try:
            for j, t in enumerate(cfg["checkpoints"]):
                advance(lat, rng, t * L * L, event_log=log)
                io.write_cells(out / f"droplet-L{L}-seed{seed}-{j:03d}.txt", droplet(lat))
            d = death_time(lat, rng, event_log=log)
        except SimulationTimeout as exc:
            print(f"seed {seed}: simulation timeout: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        finally:
            if log is not None:
                log.close()
        deaths[f"death.seed{seed}"] = d / L**2
        print(f"seed {seed}: death_time/L^2 = {d / L**2!r}")
    io.write_keyvalue(out / f"deaths-L{L}.txt", {"L": L, "T": cfg["_shape"].shrink_time, **deaths})
    return 0


def _polyline(path: Path, pts) -> None:
    path.write_text("".join(f"{x!r} {y!r}\n" for x, y in pts))


def cmd_compare(cfg: dict) -> int:
    plan: ExperimentPlan = cfg["_plan"]
    out = Path(cfg["out"])
    try:
        report = run_experiment(plan, workers=cfg["workers"], keep_droplets=cfg["emit_plot_data"])
    except FlowFailure as exc:
        print(f"flow solver failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    csv_path, json_path = report.write(out)
    if cfg["emit_plot_data"]:
        _emit_plot_data(report, out / f"plot-{plan.config_hash()}")
    for a in report.aggregates():
        print(f"L={a['L']}: pass fraction {a['pass_fraction']:.3f}, mean hausdorff {a['mean_hausdorff']:.5f}, "
              f"death/L^2 {a['death_mean']:.5f} (T = {plan.T:.5f})")
    print(f"wrote {csv_path} and {json_path}")
    return 0


def _emit_plot_data(report: ComparisonReport, pdir: Path) -> None:
    from .geometry import PolygonRegion, cell_outline

    pdir.mkdir(parents=True, exist_ok=True)
    for j, t in enumerate(report.plan.checkpoints):
        dom = report.trajectory.domain(t)
        if isinstance(dom, PolygonRegion):
            pts = dom.curve.points
            _polyline(pdir / f"flow-{j:03d}.txt", list(pts) + [pts[0]])
        else:
            _polyline(pdir / f"flow-{j:03d}.txt", [(dom.x, dom.y)])
    for (L, seed, j), cells in sorted(report.droplets.items()):
        segs = cell_outline(cells)
        (pdir / f"droplet-L{L}-seed{seed}-{j:03d}.txt").write_text(
            "".join(f"{a!r} {b!r} {c!r} {d!r}\n" for a, b, c, d in segs))


def cmd_report(cfg: dict) -> int:
    csv_path = Path(cfg["report"])
    json_path = csv_path.with_name(csv_path.name.replace("report-", "summary-").replace(".csv", ".json"))
    if not csv_path.exists() or not json_path.exists():
        raise ConfigError(f"need both {csv_path} and {json_path}")
    summary = json.loads(json_path.read_text())
    c = summary["config"]
    plan = ExperimentPlan(
        ShapeSpec.parse(c["shape"], center=tuple(c["shape.center"])), tuple(c["L"]), tuple(c["seeds"]),
        c["eta"], tuple(c["checkpoints"]), an.from_config(*_profile_args(c["anisotropy"])),
        c["flow.n"], c["margin"], c["threshold"],
    )
    report = ComparisonReport.from_csv(plan, csv_path, summary.get("flow"))
    lines = [f"pass fraction L={a['L']}: {a['pass_fraction']!r}" for a in report.aggregates()]
    if len(set(plan.L)) >= 2:
        lines.append(convergence_table(report).format())
    text = "\n".join(lines) + "\n"
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / f"aggregate-{plan.config_hash()}.txt").write_text(text)
    print(text, end="")
    return 0


def _profile_args(desc: str):
    kind, _, val = desc.partition(":")
    if kind == "mollified":
        return kind, float(val), None
    if kind == "constant":
        return kind, None, float(val)
    return kind, None, None


COMMANDS = {"shapes": cmd_shapes, "flow": cmd_flow, "glauber": cmd_glauber, "compare": cmd_compare, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dropletflow", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
        for flag, key in FLAG_KEYS.items():
            if key in COMMAND_KEYS[name]:
                sp.add_argument(f"--{flag.replace('_', '-')}", dest=f"flag_{flag}", help=KEYS[key].help)
        if "emit_plot_data" in COMMAND_KEYS[name]:
            sp.add_argument("--emit-plot-data", action="store_true", help=KEYS["emit_plot_data"].help)
        if "event_log" in COMMAND_KEYS[name]:
            sp.add_argument("--event-log", action="store_true", help=KEYS["event_log"].help)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_values = io.read_keyvalue(args.config) if args.config else {}
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v.strip()
        for flag, key in FLAG_KEYS.items():
            v = getattr(args, f"flag_{flag}", None)
            if v is not None:
                overrides[key] = v
        if getattr(args, "emit_plot_data", False):
            overrides["emit_plot_data"] = "true"
        if getattr(args, "event_log", False):
            overrides["event_log"] = "true"
        cfg = resolve_config(args.command, file_values, overrides)
        echo_config(args.command, cfg, _canonical(cfg))
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FlowFailure, SimulationTimeout, DegenerateCurveError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
