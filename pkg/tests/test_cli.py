import json
from pathlib import Path

import pytest

from symlogflow.cli import EXIT_CONFIG, EXIT_ERROR, EXIT_MISMATCH, EXIT_OK, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_validate_prints_defaults(capsys):
    assert main(["validate-config", str(CONFIGS / "rot25.yaml")]) == EXIT_OK
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["precision"] == 256


def test_validate_bad(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("version: 1\nkind: pipeline\niet: nope\nroof: symmetric\n")
    assert main(["validate-config", str(p)]) == EXIT_CONFIG
    p.write_text(": : :")
    assert main(["validate-config", str(p)]) == EXIT_CONFIG


def test_wrong_kind(tmp_path):
    assert main(["run-surface", str(CONFIGS / "rot25.yaml"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_run_and_replay(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["run-pipeline", str(CONFIGS / "rot25.yaml"), "--out", str(out), "--seed", "4"]) == EXIT_OK
    assert "hypotheses-verified" in capsys.readouterr().out
    assert json.loads((out / "ledger.json").read_text())["seed"] == 4
    assert main(["replay", str(out)]) == EXIT_OK
    assert "identical" in capsys.readouterr().out
    (out / "tails_h5.csv").write_text("edited\n")
    assert main(["replay", str(out)]) == EXIT_MISMATCH


def test_runtime_error(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    # h_max 0 passes validation only if the scan accepts it; either way it must not crash the CLI
    p.write_text("version: 1\nkind: pipeline\niet: rot25\nroof: symmetric\nscan: {h_max: 0}\n")
    assert main(["run-pipeline", str(p), "--out", str(tmp_path / "o")]) in (EXIT_CONFIG, EXIT_ERROR)


def test_surface_command(tmp_path, capsys):
    assert main(["run-surface", str(CONFIGS / "h11.yaml"), "--out", str(tmp_path / "s")]) == EXIT_OK
    assert "separation ok" in capsys.readouterr().out
