import io

import pytest

from ambrsim import SimConfig
from ambrsim.harness import (
    CSV_COLUMNS, PRESETS, Scenario, SweepAborted, SweepResult, analytic_sweep,
    emit_analytic_csv, emit_csv, read_csv, run_scenario,
)
import ambrsim.harness as harness

QUICK = {"sim_time": 25.0, "n": 12, "num_flows": 2, "cbr_rate": 1.0}


def test_presets_verbatim():
    f8, f9, f10 = (PRESETS[k] for k in
                   ("fig8-size-sweep", "fig9-mobility-sweep", "fig10-pause-sweep"))
    assert (f8.param, f8.values) == ("n", (80, 90, 100, 150, 200))
    assert f8.fixed == {"v_max": 10.0, "pause": 10.0, "sim_time": 200.0, "cbr_rate": 10.0}
    assert (f9.param, f9.values) == ("v_max", (10.0, 20.0, 30.0, 40.0, 50.0))
    assert f9.fixed == {"n": 100, "pause": 10.0, "sim_time": 200.0, "cbr_rate": 10.0}
    assert (f10.param, f10.values) == ("pause", (50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0))
    assert f10.fixed == {"n": 50, "sim_time": 7500.0, "cbr_rate": 5.0}
    assert "flood-reactive-lr" in f10.protocols


def test_preset_points_apply_bindings():
    pts = PRESETS["fig10-pause-sweep"].points()
    assert [v for v, _ in pts] == [50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0]
    assert all(c.pause == v and c.n == 50 and c.sim_time == 7500.0 for v, c in pts)


def test_overrides_never_replace_swept_param():
    pts = PRESETS["fig8-size-sweep"].points({"n": 3, "sim_time": 10.0})
    assert [c.n for _, c in pts] == [80, 90, 100, 150, 200]
    assert {c.sim_time for _, c in pts} == {10.0}


def test_fig8_one_replication_gives_points_times_protocols_rows():
    # full preset structure with a shortened horizon
    res = run_scenario("fig8-size-sweep", replications=1,
                       overrides={"sim_time": 3.0, "num_flows": 1})
    assert len(res.rows) == 5 * 3
    assert {r.seed_count for r in res.rows} == {1}
    assert {r.overhead_per_node_sd for r in res.rows} == {0.0}
    assert [r.value for r in res.rows[::3]] == [80, 90, 100, 150, 200]


def test_seeds_are_consecutive_from_base():
    sc = Scenario("t", "n", (10,), QUICK, ("flood-reactive",))
    res = run_scenario(sc, replications=3, base_seed=7)
    assert [r.seed for r in res.runs] == [7, 8, 9]
    assert res.rows[0].seed_count == 3


def test_replications_must_be_positive():
    with pytest.raises(ValueError):
        run_scenario(Scenario("t", "n", (10,), QUICK), replications=0)


def test_unknown_preset():
    with pytest.raises(ValueError, match="unknown preset"):
        run_scenario("fig11")


def test_plain_config_runs_one_point():
    cfg = SimConfig(protocol="proactive", replications=2, **QUICK)
    res = run_scenario(cfg)
    (row,) = res.rows
    assert (row.scenario, row.swept_param, row.value, row.protocol, row.seed_count) == \
        ("config", "none", "-", "proactive", 2)


def test_violation_aborts_with_point_and_seed(monkeypatch):
    real = harness.run_simulation

    def bad(cfg):
        res = real(cfg)
        if cfg.seed == 2:
            res.violations.append((1.0, "synthetic"))
        return res

    monkeypatch.setattr(harness, "run_simulation", bad)
    sc = Scenario("t", "n", (10,), QUICK, ("flood-reactive",))
    with pytest.raises(SweepAborted) as exc:
        run_scenario(sc, replications=3)
    assert exc.value.seed == 2
    assert exc.value.point == ("n", 10)
    assert "synthetic" in str(exc.value)


def test_csv_header_only_for_empty_results():
    assert emit_csv(SweepResult([], [])) == (",".join(CSV_COLUMNS) + "\n").encode()
    assert emit_csv([]) == emit_csv(SweepResult([], []))


def test_csv_one_run_one_row_and_round_trip():
    sc = Scenario("t", "n", (10,), QUICK, ("flood-reactive",))
    res = run_scenario(sc, replications=1)
    data = emit_csv(res)
    assert data.endswith(b"\n") and data.count(b"\n") == 2
    (rec,) = read_csv(data)
    r = res.rows[0]
    assert rec["overhead_per_node_mean"] == r.overhead_per_node_mean
    assert rec["delivery_ratio_mean"] == r.delivery_ratio_mean
    assert rec["protocol"] == "flood-reactive" and rec["seed_count"] == 1


def test_csv_means_recompute_from_runs():
    sc = Scenario("t", "n", (10, 14), QUICK, ("ambr", "flood-reactive"))
    res = run_scenario(sc, replications=2)
    for rec in read_csv(emit_csv(res)):
        runs = [x for x in res.runs
                if str(x.value) == rec["value"] and x.protocol == rec["protocol"]]
        assert rec["overhead_per_node_mean"] == sum(x.overhead_per_node for x in runs) / 2
        assert rec["delivery_ratio_mean"] == sum(x.delivery_ratio for x in runs) / 2


def test_csv_destinations(tmp_path):
    sc = Scenario("t", "n", (10,), QUICK, ("proactive",))
    res = run_scenario(sc, replications=1)
    data = emit_csv(res)
    path = tmp_path / "out.csv"
    emit_csv(res, path)
    assert path.read_bytes() == data
    buf = io.BytesIO()
    emit_csv(res, buf)
    assert buf.getvalue() == data
    txt = io.StringIO()
    emit_csv(res, txt)
    assert txt.getvalue().encode() == data


def test_csv_unwritable_destination(tmp_path):
    with pytest.raises(OSError):
        emit_csv([], tmp_path / "missing" / "x.csv")


def test_sweep_is_byte_identical_across_runs_and_workers():
    sc = Scenario("t", "n", (10, 14), QUICK, ("ambr", "flood-reactive-lr"))
    a = emit_csv(run_scenario(sc, replications=2))
    b = emit_csv(run_scenario(sc, replications=2))
    c = emit_csv(run_scenario(sc, replications=2, jobs=2))
    assert a == b == c


def test_analytic_single_symmetric_point():
    (row,) = analytic_sweep({"lam": [1.0], "mu": [1.0]})
    assert row["P_B"] == 0.5


def test_analytic_pn_nondecreasing_in_en():
    rows = analytic_sweep({"e_n": [1, 2, 3, 4, 5], "pb": [0.3]})
    pn = [r["P_N"] for r in rows]
    assert pn == sorted(pn)


def test_analytic_pr_identity_column():
    rows = analytic_sweep({"p0": [0.1, 0.5, 0.9], "kk": [1.0, 2.0], "e_n": [1, 3]})
    assert len(rows) == 12
    for r in rows:
        assert r["P_R"] == pytest.approx(1 - r["P_F0"] * r["P_F1"], abs=1e-12)
        assert r["P_R_check"] == pytest.approx(r["P_R"], abs=1e-12)


@pytest.mark.parametrize("ranges", [{"bogus": [1]}, {"lam": []}, {"e_n": [1.5]}, {"p0": [2.0]}])
def test_analytic_invalid_ranges(ranges):
    with pytest.raises(ValueError):
        analytic_sweep(ranges)


def test_analytic_csv_columns():
    rows = analytic_sweep({"pb": [0.25, 0.5]})
    text = emit_analytic_csv(rows).decode()
    header, *lines = text.splitlines()
    for col in ("P_B", "P_N", "P_R", "P_S_literal", "P_S_dedup", "term1", "term2", "term3"):
        assert col in header.split(",")
    assert len(lines) == 2
    assert emit_analytic_csv([]).decode().count("\n") == 1
