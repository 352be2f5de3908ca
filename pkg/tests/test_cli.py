import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from delayest.cli import COMMAND_KEYS, main, parse_grid
from delayest.errors import ConfigError

GOLDEN = Path(__file__).parent / "golden" / "help.txt"

OU = {"type": "shift", "drift": {"name": "linear", "params": {"gamma": 1.0}}, "x0": 1.0,
      "T": 2.0, "window": [0.2, 0.8], "epsilon": 0.01}
PANTO = {"type": "pantograph", "a": 0.0, "b": 1.0, "x0": 1.0, "T": 2.0, "window": [0.1, 0.9],
         "epsilon": 0.01}


def write_config(tmp_path, name="cfg.json", **kw):
    f = tmp_path / name
    f.write_text(json.dumps(kw))
    return str(f)


def test_help_matches_golden_file(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--help"])
    assert e.value.code == 0
    out = capsys.readouterr().out.replace("optional arguments:", "options:")
    assert out == GOLDEN.read_text()
    for key, default, _ in COMMAND_KEYS:
        assert f"  {key} = {json.dumps(default)}:" in out


def test_simulate_writes_path_and_envelope(tmp_path):
    cfg = write_config(tmp_path, **OU, theta0=0.5, h=1e-3, seed=4, rep=2)
    out = tmp_path / "p.csv"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x"
    assert len(lines) == 1 + 2001
    env = json.loads(out.with_suffix(".json").read_text())
    assert (env["seed"], env["rep"], env["n"], env["theta0"]) == (4, 2, 2000, 0.5)
    first = out.read_bytes()
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    assert out.read_bytes() == first


def test_invalid_window_exits_1(tmp_path, capsys):
    cfg = write_config(tmp_path, **dict(OU, window=[0.8, 0.2]), theta0=0.5)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "p.csv")]) == 1
    assert "WINDOW" in capsys.readouterr().err


def test_unknown_key_exits_1(tmp_path, capsys):
    cfg = write_config(tmp_path, **OU, theta0=0.5, colour="red")
    assert main(["simulate", "--config", cfg]) == 1
    assert "colour" in capsys.readouterr().err


def test_bad_json_exits_1(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text("{not json")
    assert main(["limit", "--config", str(f), "--theta", "0.3"]) == 1


def test_estimate_zero_noise_path(tmp_path):
    cfg = write_config(tmp_path, **dict(OU, epsilon=0.0), theta0=0.5, h=1e-4)
    p = tmp_path / "p.csv"
    assert main(["simulate", "--config", cfg, "--out", str(p)]) == 0
    out = tmp_path / "est.json"
    assert main(["estimate", "--config", cfg, "--path", str(p), "--out", str(out)]) == 0
    recs = json.loads(out.read_text())["records"]
    assert [r["estimator"] for r in recs] == ["mde", "one_step_mle_shift"]
    for r in recs:
        assert r["theta_hat"] == pytest.approx(0.5, abs=1e-4)


def test_estimate_grid_mismatch_exits_2(tmp_path, capsys):
    p = tmp_path / "p.csv"
    assert main(["simulate", "--config", write_config(tmp_path, **OU, theta0=0.5, h=1e-3),
                 "--out", str(p)]) == 0
    cfg = write_config(tmp_path, "c2.json", **OU, theta0=0.5, h=5e-4)
    assert main(["estimate", "--config", cfg, "--path", str(p)]) == 2
    assert "GRID_MISMATCH" in capsys.readouterr().err


def test_estimate_pipeline_mismatch_exits_1(tmp_path, capsys):
    p = tmp_path / "p.csv"
    cfg = write_config(tmp_path, **PANTO, theta0=0.5, h=1e-3, pipeline="shift")
    assert main(["simulate", "--config", write_config(tmp_path, "c0.json", **PANTO, theta0=0.5,
                                                      h=1e-3), "--out", str(p)]) == 0
    assert main(["estimate", "--config", cfg, "--path", str(p)]) == 1
    assert "PIPELINE_MODEL_MISMATCH" in capsys.readouterr().err


def test_fisher_table(tmp_path):
    cfg = write_config(tmp_path, **dict(OU, T=1.0), h=1e-4)
    out = tmp_path / "f.csv"
    assert main(["fisher", "--config", cfg, "--theta-grid", "0.55:0.65:11", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 11
    row = [r for r in rows if abs(float(r["theta"]) - 0.6) < 1e-9][0]
    assert float(row["info"]) == pytest.approx(0.4, abs=1e-4)


def test_limit_table(tmp_path):
    cfg = write_config(tmp_path, **dict(OU, T=1.0), h=1e-3)
    out = tmp_path / "x.csv"
    assert main(["limit", "--config", cfg, "--theta", "0.3", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    row = [r for r in rows if abs(float(r["t"]) - 0.3) < 1e-9][0]
    assert float(row["x"]) == pytest.approx(0.7, abs=1e-4)


def test_mc_zero_noise_single_rep(tmp_path):
    cfg = write_config(tmp_path, **dict(OU, epsilon=0.0), theta0=0.5, h=1e-3, reps=1,
                       target_reps=2)
    out, recs = tmp_path / "r.json", tmp_path / "r.csv"
    assert main(["mc", "--config", cfg, "--out", str(out), "--csv", str(recs)]) == 0
    rep = json.loads(out.read_text())
    assert all(e["variance"] == 0.0 for e in rep["estimators"].values())
    assert recs.read_text().startswith("rep,estimator,theta_hat,raw,clamped,normalized_error\n")


def test_mc_is_idempotent(tmp_path):
    cfg = write_config(tmp_path, **OU, theta0=0.5, h=1e-3, reps=6, target_reps=10)
    outs = []
    for i in range(2):
        out, recs = tmp_path / f"r{i}.json", tmp_path / f"r{i}.csv"
        assert main(["mc", "--config", cfg, "--out", str(out), "--csv", str(recs)]) == 0
        outs.append((out.read_bytes(), recs.read_bytes()))
    assert outs[0] == outs[1]


def test_parse_grid():
    assert list(parse_grid("0:1:3")) == [0.0, 0.5, 1.0]
    for bad in ("0:1", "1:0:3", "a:b:c", "0:1:0"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_console_entry_point(tmp_path):
    cfg = write_config(tmp_path, **dict(OU, T=1.0), h=1e-3)
    res = subprocess.run([sys.executable, "-m", "delayest.cli", "limit", "--config", cfg,
                          "--theta", "0.3"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("t,x\n")
