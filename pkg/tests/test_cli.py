import json

import numpy as np
import pytest

from dropletflow import cli, io


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_flow_disk(tmp_path):
    assert run("flow", "--shape", "disk:0.4", "--n", 512, "--out", tmp_path) == 0
    meta = io.read_keyvalue(tmp_path / "metadata.txt")
    assert float(meta["T_observed"]) == pytest.approx(0.2513, abs=1e-3)
    assert (tmp_path / "config-flow.txt").exists()
    assert sorted((tmp_path / "snapshots").glob("snap-*.txt"))


def test_flow_star_has_concave_arcs(tmp_path):
    assert run("flow", "--shape", "star:0.5,0.2,6", "--n", 256, "--out", tmp_path) == 0
    first = sorted((tmp_path / "snapshots").glob("snap-*.txt"))[0]
    curve, t = io.read_curve_snapshot(first)
    k = np.array([float(line.split()[3]) for line in first.read_text().splitlines()[1:] if line.strip()])
    assert t == 0.0 and len(curve) == 256
    assert k.min() < 0 < k.max()


def test_missing_key(tmp_path, capsys):
    assert run("flow", "--out", tmp_path) == cli.EXIT_CONFIG
    assert "'shape'" in capsys.readouterr().err


def test_unknown_and_misplaced_keys(tmp_path):
    assert run("flow", "--shape", "disk:0.4", "--set", "bogus=1", "--out", tmp_path) == cli.EXIT_CONFIG
    assert run("flow", "--shape", "disk:0.4", "--set", "eta=0.1", "--out", tmp_path) == cli.EXIT_CONFIG


def test_glauber_outputs_and_determinism(tmp_path):
    args = ["glauber", "--shape", "disk:0.4", "--L", 128, "--seed", 7, "--checkpoints", "0.1,0.2"]
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--out", tmp_path / "b") == 0
    files = sorted(p.name for p in (tmp_path / "a").glob("droplet-*.txt"))
    assert files == ["droplet-L128-seed7-000.txt", "droplet-L128-seed7-001.txt"]
    for name in files + ["deaths-L128.txt"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    death = float(io.read_keyvalue(tmp_path / "a" / "deaths-L128.txt")["death.seed7"])
    assert death > 0.2


def test_glauber_rejects_small_L(tmp_path):
    assert run("glauber", "--shape", "disk:0.4", "--L", 8, "--out", tmp_path) == cli.EXIT_CONFIG


def test_echoed_config_reruns_identically(tmp_path):
    assert run("glauber", "--shape", "disk:0.3", "--L", 32, "--replicas", 2, "--checkpoints", "0.05",
               "--event-log", "--out", tmp_path / "a") == 0
    echoed = (tmp_path / "a" / "config-glauber.txt").read_text().replace(str(tmp_path / "a"), str(tmp_path / "b"))
    (tmp_path / "cfg.txt").write_text(echoed)
    assert run("glauber", "--config", tmp_path / "cfg.txt") == 0
    for p in (tmp_path / "a").glob("*.txt"):
        if p.name != "config-glauber.txt":
            assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_flags_override_file(tmp_path):
    (tmp_path / "cfg.txt").write_text("shape = disk:0.3\nL = 8\n")
    assert run("glauber", "--config", tmp_path / "cfg.txt", "--L", 32, "--out", tmp_path) == 0


def test_compare_and_report(tmp_path):
    out = tmp_path / "cmp"
    assert run("compare", "--shape", "disk:0.3", "--L", "32,48", "--replicas", 2, "--eta", 0.1,
               "--fractions", "0.25,0.5", "--n", 256, "--emit-plot-data", "--out", out) == 0
    (csv_path,) = out.glob("report-*.csv")
    h = csv_path.stem.split("-", 1)[1]
    summary = json.loads((out / f"summary-{h}.json").read_text())
    assert [a["L"] for a in summary["aggregates"]] == [32, 48]
    plot = out / f"plot-{h}"
    assert len(list(plot.glob("flow-*.txt"))) == 2
    assert len(list(plot.glob("droplet-*.txt"))) == 2 * 2 * 2
    assert run("report", "--report", csv_path, "--out", tmp_path / "agg") == 0
    text = (tmp_path / "agg" / f"aggregate-{h}.txt").read_text()
    assert "pass fraction L=48" in text and "hausdorff decreasing" in text


def test_compare_rejects_empty_L(tmp_path):
    assert run("compare", "--shape", "disk:0.3", "--set", "L=", "--eta", 0.1, "--out", tmp_path) == cli.EXIT_CONFIG


def test_report_missing_file(tmp_path):
    assert run("report", "--report", tmp_path / "report-x.csv", "--out", tmp_path) == cli.EXIT_CONFIG


def test_shapes(tmp_path):
    assert run("shapes", "--shape", "ellipse:0.4,0.2", "--n", 128, "--out", tmp_path) == 0
    info = io.read_keyvalue(tmp_path / "shape-info.txt")
    assert float(info["area"]) == pytest.approx(np.pi * 0.08, rel=1e-9)
    assert int(info["inflections"]) == 0
