import csv
import json
import subprocess
import sys

import pytest

from frag_avalanche.cli import EVENT_HEADER, TERMINAL_HEADER, main
from frag_avalanche.config import DEFAULT_SEED, SEED_ENV, RunConfig
from frag_avalanche.errors import ConfigError


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_ini_round_trip():
    cfg = RunConfig(r=0.4, thresholds="0.3, 0.05", sizes=(1.0, 0.5), seed=7, out="runs/a",
                    only=(1, 4), events=False, level=2)
    again = RunConfig.from_ini(cfg.to_ini())
    assert again == cfg


def test_ini_errors():
    with pytest.raises(ConfigError):
        RunConfig.from_ini("[model]\nspeed = 3\n")
    with pytest.raises(ConfigError):
        RunConfig.from_ini("[extras]\nr = 0.5\n")
    with pytest.raises(ConfigError):
        RunConfig.from_ini("[run]\nunbanded = maybe\n")
    with pytest.raises(ConfigError):
        RunConfig.load("/nonexistent/run.ini")


def test_thresholds_rule():
    assert RunConfig(depth=3).threshold_values() == (0.25, 0.0625, 0.015625)
    assert RunConfig(thresholds="0.3; 0.05").threshold_values() == (0.3, 0.05)
    with pytest.raises(ConfigError):
        RunConfig(thresholds="geometric:x").threshold_values()


def test_seed_resolution(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    assert RunConfig().resolved_seed() == DEFAULT_SEED
    monkeypatch.setenv(SEED_ENV, "0x10")
    assert RunConfig().resolved_seed() == 16
    assert RunConfig(seed=3).resolved_seed() == 3
    monkeypatch.setenv(SEED_ENV, "abc")
    with pytest.raises(ConfigError):
        RunConfig().resolved_seed()


def test_params_command(capsys):
    assert main(["params", "--r", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "beta     = 0.3333333333333333" in out
    assert "lambda0  = 0.1388888888888889" in out


@pytest.mark.parametrize(
    "argv, message",
    [
        (["params", "--r", "1"], "RatioOutOfRange"),
        (["params", "--thresholds", "0.4,0.1"], "ThresholdViolation"),
        (["params", "--config", "/nonexistent.ini"], "ConfigError"),
        (["simulate-chain", "--x0", "0.01"], "BelowResolution"),
    ],
)
def test_error_exit_codes(capsys, argv, message):
    assert main(argv) == 1
    assert message in capsys.readouterr().err


def test_bad_usage_exits_one(capsys):
    assert main(["teleport"]) == 1
    assert main(["params", "--r", "abc"]) == 1


def test_population_cap_exit(tmp_path, capsys):
    argv = ["simulate-branching", "--t-end", "30", "--cap", "1000", "--replicas", "1", "--out", str(tmp_path)]
    assert main(argv) == 1
    assert "PopulationCap" in capsys.readouterr().err


def test_config_file_and_flag_override(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text("[model]\nr = 0.5\n[run]\nreplicas = 30\nt_end = 0.5\nseed = 9\n[output]\nquiet = true\n")
    out = tmp_path / "o"
    assert main(["simulate-chain", "--config", str(ini), "--replicas", "40", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == 1
    assert summary["replicas"] == 40 and summary["seed"] == 9 and summary["t_end"] == 0.5
    assert capsys.readouterr().out == ""


def test_chain_outputs_byte_identical(tmp_path):
    digests = []
    for k, workers in enumerate(("1", "2")):
        out = tmp_path / f"run{k}"
        assert main(["simulate-chain", "--replicas", "1000", "--seed", "42", "--t-end", "2",
                     "--workers", workers, "--quiet", "--out", str(out)]) == 0
        digests.append({p.name: p.read_bytes() for p in out.iterdir() if p.name != "timing.json"})
    assert digests[0] == digests[1]
    assert set(digests[0]) == {"events.csv", "terminal.csv", "summary.json"}


def test_chain_csv_schema(tmp_path):
    assert main(["simulate-chain", "--replicas", "200", "--t-end", "3", "--quiet", "--out", str(tmp_path)]) == 0
    events = _rows(tmp_path / "events.csv")
    assert tuple(events[0]) == EVENT_HEADER
    assert {r[2] for r in events[1:]} <= {"Jump", "Hold"}
    terminal = _rows(tmp_path / "terminal.csv")
    assert tuple(terminal[0]) == TERMINAL_HEADER
    assert sum(int(r[4]) for r in terminal[1:]) == 200
    assert sum(float(r[5]) for r in terminal[1:]) == pytest.approx(1.0)
    timing = json.loads((tmp_path / "timing.json").read_text())
    assert timing["backend"] in ("python", "compiled")


def test_no_events_flag(tmp_path):
    assert main(["simulate-chain", "--replicas", "50", "--no-events", "--quiet", "--out", str(tmp_path)]) == 0
    assert not (tmp_path / "events.csv").exists()


def test_sde_summary_range(tmp_path):
    assert main(["simulate-sde", "--replicas", "500", "--t-end", "2", "--quiet", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    text = json.dumps(summary)
    assert "terminal_size" in text
    mean = summary["terminal_size"]["mean"]
    assert 0.25 <= mean <= 1.0


def test_branching_and_sizes_run(tmp_path):
    assert main(["simulate-branching", "--replicas", "100", "--quiet", "--out", str(tmp_path / "b")]) == 0
    terminal = _rows(tmp_path / "b" / "terminal.csv")
    assert tuple(terminal[0]) == TERMINAL_HEADER
    assert main(["simulate-sizes", "--sizes", "1.0,0.2", "--level", "2", "--replicas", "100", "--quiet",
                 "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "summary.json").exists()


def test_semigroup_identity_at_zero(tmp_path):
    assert main(["semigroup", "--t-end", "0", "--quiet", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "semigroup.csv")
    n = len(rows) - 1
    for a, row in enumerate(rows[1:]):
        assert [float(v) for v in row[5:]] == [1.0 if b == a else 0.0 for b in range(n)]
    # clipped edge state is written with -1 lattice columns
    assert rows[-1][1:5] == ["-1", "-1", "-1", "0"]


@pytest.mark.parametrize(
    "argv, column, value",
    [
        (["--quantity", "cumulant", "--function", "one"], "h", 1.0),
        (["--quantity", "resolvent", "--alpha", "2", "--function", "one"], "u", 0.5),
    ],
)
def test_semigroup_quantities(tmp_path, argv, column, value):
    assert main(["semigroup", "--quiet", "--out", str(tmp_path)] + argv) == 0
    rows = _rows(tmp_path / "semigroup.csv")
    k = rows[0].index(column)
    assert all(float(r[k]) == pytest.approx(value, abs=1e-12) for r in rows[1:])


def test_support_command(tmp_path):
    assert main(["support", "--quiet", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "support.csv")
    assert [float(r[0]) for r in rows[1:]] == pytest.approx([1, 2 / 3, 4 / 9, 1 / 3, 8 / 27, 1 / 4])


def test_verify_forced_failure(tmp_path, capsys):
    code = main(["verify", "--only", "1,2", "--tol-scale", "0", "--quiet", "--out", str(tmp_path)])
    assert code == 2
    assert "failing criteria" in capsys.readouterr().err
    report = json.loads((tmp_path / "report.json").read_text())
    assert report is not None


def test_verify_subset_passes(tmp_path):
    assert main(["verify", "--only", "1,2,3", "--quiet", "--out", str(tmp_path)]) == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "frag_avalanche.cli", "params"], capture_output=True, text=True)
    assert proc.returncode == 0 and "lambda0" in proc.stdout
