import pytest

from ambrsim.cli import main
from ambrsim.harness import CSV_COLUMNS, read_csv

QUICK = ["--set", "sim_time=4", "--set", "num_flows=1", "--set", "n=8"]


def test_run_config_to_file(tmp_path):
    out = tmp_path / "r.csv"
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# quick\nprotocol=flood-reactive\n")
    assert main(["run", "--config", str(cfg), *QUICK, "--replications", "2", "--out", str(out)]) == 0
    (rec,) = read_csv(out.read_bytes())
    assert rec["protocol"] == "flood-reactive" and rec["seed_count"] == 2


def test_run_to_stdout(capfdbinary):
    assert main(["run", *QUICK, "--replications", "1"]) == 0
    out = capfdbinary.readouterr().out
    assert out.startswith(",".join(CSV_COLUMNS).encode())


def test_run_preset_respects_overrides(tmp_path):
    out = tmp_path / "p.csv"
    rc = main(["run", "--preset", "fig9-mobility-sweep", "--replications", "1",
               "--set", "sim_time=2", "--set", "n=6", "--set", "num_flows=1",
               "--out", str(out)])
    assert rc == 0
    recs = read_csv(out.read_bytes())
    assert len(recs) == 5 * 3
    assert {r["swept_param"] for r in recs} == {"v_max"}


def test_run_bad_config_exits_2(tmp_path, capsys):
    assert main(["run", "--set", "v_max=-1"]) == 2
    assert "v_max" in capsys.readouterr().err


def test_validate_config(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("n=200\nprotocol=ambr\n")
    assert main(["validate-config", str(cfg)]) == 0
    assert capsys.readouterr().out.strip() == "ok n=200"
    cfg.write_text("n=200\nwarp=9\n")
    assert main(["validate-config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "warp" in err and "c.cfg:2" in err


def test_validate_defaults(capsys):
    assert main(["validate-config"]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_analytic_ranges(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["analytic", "e_n=1:5:1", "pb=0.5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 5
    header = lines[0].split(",")
    pn = [float(l.split(",")[header.index("P_N")]) for l in lines[1:]]
    assert pn == sorted(pn)


def test_analytic_invalid_exits_2(capsys):
    assert main(["analytic", "bogus=1"]) == 2


def test_analytic_malformed_range():
    with pytest.raises(SystemExit):
        main(["analytic", "e_n"])
