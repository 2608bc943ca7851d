import csv
import json
import subprocess
import sys

import pytest

from p2ptv.cli import build_parser, config_from_args, main

SMALL = ["--set", "experiment.num_users=10", "--set", "experiment.num_programs=3"]


def test_simulate_writes_outputs(tmp_path, capsys):
    code = main(["simulate", "--rounds", "2", "--trials", "3", "--seed", "4", "--out", str(tmp_path), *SMALL])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["rows"] == 1
    with open(tmp_path / "sweep.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["rounds"] for r in rows] == ["2"] and rows[0]["trials"] == "3"


def test_sweep_with_debug_dumps(tmp_path):
    argv = ["sweep", "--rounds-list", "1,3", "--trials", "2", "--out", str(tmp_path), "--trace", "--dump-inputs"]
    assert main(argv + SMALL) == 0
    for name in ("sweep.csv", "trials.csv", "histogram.csv", "summary.json", "trace.csv", "elasticity.csv", "wtp.csv"):
        assert (tmp_path / name).exists()
    with open(tmp_path / "trace.csv", newline="") as fh:
        assert len(list(csv.reader(fh))) == 1 + 2 * 3 * 3


def test_config_file_and_flags(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("experiment.trials = 50\nsettlement.incentive_rate = 0.5\n")
    args = build_parser().parse_args(
        ["simulate", "--config", str(path), "--trials", "5", "--no-incentives", "--unicast-only",
         "--wtp-mode", "staircase", "--out", str(tmp_path)]
    )
    cfg = config_from_args(args)
    assert (cfg.trials, cfg.incentive_rate, cfg.peer_serving, cfg.wtp_mode) == (5, 0.0, False, "staircase")


@pytest.mark.parametrize(
    "argv",
    [
        ["sweep", "--rounds-list", "1,x", "--out", "o"],
        ["simulate", "--out", "o", "--set", "no.such=1"],
        ["simulate", "--out", "o", "--trials", "0"],
        ["simulate"],
        ["launch"],
    ],
)
def test_errors_are_json_on_stderr(argv, capsys):
    assert main(argv) != 0
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert set(err) == {"error", "message"}


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "p2ptv", "simulate", "--rounds", "1", "--trials", "1", "--out", str(tmp_path), *SMALL],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    missing = subprocess.run([sys.executable, "-m", "p2ptv", "simulate", "--config", str(tmp_path / "none.toml"),
                              "--out", str(tmp_path)], capture_output=True, text=True)
    assert missing.returncode == 2
    assert json.loads(missing.stderr)["error"] == "FileNotFoundError"
