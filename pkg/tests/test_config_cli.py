import subprocess
import sys

import numpy as np
import pytest

from postsolve import config as cfgmod
from postsolve.cli import main
from postsolve.config import ConfigError, SCHEMA, load, parse_text, resolve
from postsolve.pipeline import run
from postsolve.records import parse_record, record_text


def test_documented_defaults():
    cfg = load(env={})
    assert cfg["posterior.T"] == 100
    assert cfg["posterior.N"] == 5 and cfg["posterior.n"] == 1
    assert cfg["posterior.w"] == 0.1 and cfg["posterior.m"] == 0.01
    assert cfg["measurement.sigma"] == 0.01
    assert cfg["posterior.taus"] == "501,401,301,201,101,1"
    text = cfgmod.documented_defaults()
    for key in SCHEMA:
        assert f"\n{key} = " in "\n" + text


def test_unknown_key_named_in_error():
    with pytest.raises(ConfigError, match="posterior.bogus"):
        resolve({"posterior.bogus": "1"}, env={})


def test_bad_value_rejected():
    with pytest.raises(ConfigError):
        resolve({"posterior.T": "many"}, env={})


def test_comments_and_blank_lines():
    raw = parse_text("# header\n\nposterior.T = 20  # fewer steps\n")
    assert raw == {"posterior.T": "20"}
    with pytest.raises(ConfigError):
        parse_text("not a pair")


def test_env_override():
    cfg = resolve({"posterior.T": "20"}, env={"POSTSOLVE_POSTERIOR_T": "7",
                                              "POSTSOLVE_MODEL_1_MEAN": "3.5"})
    assert cfg["posterior.T"] == 7
    assert cfg["model.1.mean"] == "3.5"


def test_echo_round_trip(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("posterior.T = 12\nposterior.h = 3.3e-6\nmodel.0.var = 0.3\n")
    cfg = load(path, env={})
    model = cfgmod.build_model(cfg)
    rec = run(cfgmod.build_run_spec(cfg, "edit", model), model)
    parsed = parse_record(record_text(rec, cfg))
    assert resolve(parsed.config, env={}) == cfg
    assert np.array_equal(parsed.signal, rec.output)
    assert parsed.kept_indices == rec.operator.kept_indices
    assert len(parsed.snapshots) == len(rec.snapshots)


def test_cli_determinism(tmp_path):
    for d in ("a", "b"):
        assert main(["edit", "--seed", "7", "--out", str(tmp_path / d)]) == 0
    for name in ("edit_seed7.txt", "edit_seed7_trajectory.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_seed_isolation(tmp_path):
    assert main(["edit", "--seed", "3", "--runs", "2", "--out", str(tmp_path)]) == 0
    a = (tmp_path / "edit_seed3_trajectory.csv").read_text()
    b = (tmp_path / "edit_seed4_trajectory.csv").read_text()
    assert a != b


def test_cli_batch_aggregate(tmp_path, capsys):
    assert main(["reconstruct", "--runs", "5", "--jobs", "2", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "reconstruct_summary.csv").read_text().splitlines()
    assert len(lines) == 7
    assert lines[-1].startswith("aggregate,")
    assert capsys.readouterr().out.startswith("aggregate,")
    assert len(list(tmp_path.glob("reconstruct_seed*.txt"))) == 5
    assert not list(tmp_path.glob(".*tmp"))


def test_cli_fourier_edit_rejected(tmp_path, capsys):
    cfg = tmp_path / "f.cfg"
    cfg.write_text("measurement.operator = fourier\nmeasurement.grid_rows = 2\n")
    assert main(["edit", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "reconstruction-only" in capsys.readouterr().err
    assert main(["reconstruct", "--config", str(cfg), "--out", str(tmp_path)]) == 0


def test_cli_large_w_warns_and_runs(tmp_path, capsys):
    cfg = tmp_path / "w.cfg"
    cfg.write_text("posterior.w = 0.5\n")
    assert main(["edit", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert "warning" in capsys.readouterr().err
    assert (tmp_path / "edit_seed0.txt").exists()


def test_cli_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("posterior.TT = 3\n")
    assert main(["edit", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "posterior.TT" in capsys.readouterr().err


def test_cli_sweep(tmp_path):
    args = ["sweep", "--w", "0,0.1", "--f", "0.5", "--T", "10", "--runs", "2",
            "--out", str(tmp_path)]
    assert main(args) == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "w,f,T,mean_mse,mean_measured_mse,sign_match_rate"
    assert len(lines) == 3


def test_console_entry_point_defaults():
    out = subprocess.run([sys.executable, "-m", "postsolve.cli", "defaults"],
                         capture_output=True, text=True, check=True).stdout
    assert "posterior.T = 100" in out
