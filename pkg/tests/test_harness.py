import json
import math

import pytest

from dropletflow import geometry as g
from dropletflow import harness as hs
from dropletflow.shapes import ShapeSpec


@pytest.fixture(scope="module")
def small_plan():
    return hs.ExperimentPlan.with_fractions(ShapeSpec.disk(0.3), (32, 48), (0, 1), 0.1,
                                            (0.0, 0.5, 1.2), flow_n=256)


@pytest.fixture(scope="module")
def small_traj(small_plan):
    return hs.flow_for(small_plan)


@pytest.fixture(scope="module")
def small_report(small_plan, small_traj):
    return hs.run_experiment(small_plan, small_traj)


def test_plan_validation():
    disk = ShapeSpec.disk(0.3)
    with pytest.raises(ValueError):
        hs.ExperimentPlan(disk, (), (0,), 0.1)
    with pytest.raises(ValueError):
        hs.ExperimentPlan(disk, (32,), (0,), 0.0)
    with pytest.raises(ValueError):
        hs.ExperimentPlan(disk, (32,), (0,), 0.1, (0.1, 0.05))
    with pytest.raises(ValueError):
        hs.ExperimentPlan(disk, (32,), (0,), 0.1, (-0.1,))
    with pytest.raises(ValueError):
        hs.ExperimentPlan(disk, (8,), (0,), 0.1)
    plan = hs.ExperimentPlan(disk, (32,), (0,), 0.1)
    assert plan.T == pytest.approx(math.pi * 0.09 / 2, rel=1e-9)


def test_empty_checkpoints_give_death_only(small_traj):
    plan = hs.ExperimentPlan(ShapeSpec.disk(0.3), (32,), (0, 1, 2), 0.1, flow_n=256)
    rep = hs.run_experiment(plan, small_traj)
    assert rep.rows == [] and len(rep.deaths) == 3
    assert all(d.death > 0 for d in rep.deaths)


def test_initial_checkpoint_within_lattice_spacing(small_report):
    for r in small_report.rows:
        if r.t == 0.0:
            assert r.hausdorff <= math.sqrt(2) / r.L + g.raster_tolerance(r.resolution)
            assert r.sandwich


def test_post_extinction_checkpoint(small_report, small_plan):
    late = [r for r in small_report.rows if r.t > small_plan.T]
    assert late
    for r in late:
        # the flow domain is a point after T; inner inclusion holds vacuously
        assert r.inner
        if r.n_minus == 0:
            assert r.outer and math.isnan(r.hausdorff)


def test_sandwich_coherence(small_report, small_plan):
    for r in small_report.rows:
        if r.sandwich and not math.isnan(r.hausdorff):
            assert r.hausdorff <= small_plan.eta + g.raster_tolerance(r.resolution)


def test_aggregates_recomputable(small_report, small_plan, tmp_path):
    csv_path, json_path = small_report.write(tmp_path)
    assert small_plan.config_hash() in csv_path.name
    again = hs.ComparisonReport.from_csv(small_plan, csv_path, small_report.flow)
    assert again.csv_text() == small_report.csv_text()
    summary = json.loads(json_path.read_text())
    for a, b in zip(summary["aggregates"], again.aggregates()):
        assert a["pass_fraction"] == b["pass_fraction"]
        assert a["mean_hausdorff"] == pytest.approx(b["mean_hausdorff"], rel=1e-12)
    assert summary["config_hash"] == small_plan.config_hash()
    assert "numpy" in summary["versions"]


def test_report_determinism(small_plan, small_traj, small_report, tmp_path):
    again = hs.run_experiment(small_plan, small_traj, workers=2)
    a, b = small_report.write(tmp_path / "a"), again.write(tmp_path / "b")
    assert a[0].read_bytes() == b[0].read_bytes()
    assert a[1].read_bytes() == b[1].read_bytes()


def test_death_times_near_T(small_report, small_plan):
    for d in small_report.deaths:
        assert d.status == "ok"
        assert abs(d.death - small_plan.T) < 0.5 * small_plan.T


def test_convergence_table(small_report, small_plan):
    table = hs.convergence_table(small_report)
    assert [r.L for r in table.rows] == [32, 48]
    m, _ = small_report.death_stats(48)
    assert table.rows[1].death_error == pytest.approx(abs(m - small_plan.T))
    assert "hausdorff decreasing" in table.format()
    one = hs.ComparisonReport(
        hs.ExperimentPlan(ShapeSpec.disk(0.3), (32,), (0,), 0.1), [], [])
    with pytest.raises(ValueError):
        hs.convergence_table(one)


def test_seed_pass_requires_every_checkpoint():
    plan = hs.ExperimentPlan(ShapeSpec.disk(0.3), (32,), (0, 1), 0.1, (0.01, 0.02))
    row = dict(L=32, t=0.01, n_minus=1, hausdorff=0.0, inner_excess=0.0, outer_excess=0.0, resolution=1e-3)
    rows = [hs.CheckpointRow(seed=0, inner=True, outer=True, **row),
            hs.CheckpointRow(seed=0, inner=True, outer=False, **{**row, "t": 0.02}),
            hs.CheckpointRow(seed=1, inner=True, outer=True, **row),
            hs.CheckpointRow(seed=1, inner=True, outer=True, **{**row, "t": 0.02})]
    rep = hs.ComparisonReport(plan, rows, [])
    assert rep.seed_passes(32) == {0: False, 1: True}
    assert rep.pass_fraction(32) == 0.5
