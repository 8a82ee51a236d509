import csv
import json
from pathlib import Path

import pytest

from mrkit.cli import cli_main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_list_methods(capsys):
    assert cli_main(["list-methods"]) == 0
    assert "imex-mri4-k" in capsys.readouterr().out


def test_missing_config_exit_2(tmp_path):
    assert cli_main(["converge", "--config", str(tmp_path / "missing.cfg")]) == 2


@pytest.mark.parametrize("argv", [["frobnicate"], ["converge"], ["converge", "--bogus", "x"], []])
def test_usage_errors_exit_2(argv, capsys):
    assert cli_main(argv) == 2
    assert "usage" in capsys.readouterr().err


def test_bad_method_override(tmp_path):
    assert cli_main(["converge", "--config", str(CONFIGS / "linear_mri3.cfg"), "--methods", "nope",
                     "--out", str(tmp_path)]) == 2


def test_converge_writes_outputs(tmp_path):
    out = tmp_path / "run"
    code = cli_main(["converge", "--config", str(CONFIGS / "linear_mri3.cfg"), "--out", str(out),
                     "--methods", "mri3-4"])
    assert code == 0
    rows = list(csv.DictReader(open(out / "study.csv", encoding="utf-8")))
    assert {"H", "error", "rate"} <= set(rows[0])
    assert len(rows) == 5
    summary = json.load(open(out / "summary.json"))
    assert summary["slopes"]["mri3-4"] > 2.7


def test_reference_subcommand(tmp_path):
    assert cli_main(["reference", "--config", str(CONFIGS / "linear_mri3.cfg"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "reference.csv").read_text().count("\n") == 2


def test_study_failure_exit_1(tmp_path, monkeypatch):
    from mrkit import cli

    def boom(cfg):
        raise RuntimeError("disk on fire")

    monkeypatch.setitem(cli.RUNNERS, "converge", boom)
    assert cli_main(["converge", "--config", str(CONFIGS / "linear_mri3.cfg"), "--out", str(tmp_path)]) == 1
