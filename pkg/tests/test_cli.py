import json

import pytest

from mhdci.cli import main


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_decompose_zero_state(tmp_path, capsys):
    assert run(tmp_path, "decompose", "--state", "zero", "--r", "2", "--s", "1", "--tau", "0.5") == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["atoms_in_K"] and summary["ok"]
    lam = json.loads((tmp_path / "laminate.json").read_text())
    assert lam["meta"]["r"] == 2.0


def test_malformed_state_is_schema_error(tmp_path, capsys):
    assert run(tmp_path, "decompose", "--state", "[1, 2") == 2
    assert json.loads(capsys.readouterr().err)["error"] == "SchemaError"


def test_short_state_is_schema_error(tmp_path):
    assert run(tmp_path, "decompose", "--state", "[1, 2, 3]") == 2


def test_state_outside_relaxed_set(tmp_path, capsys):
    state = json.dumps([5.0] + [0.0] * 17)
    assert run(tmp_path, "decompose", "--state", state) == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "NotInRelaxedSet" and err["inequality"].startswith("|u+B|")


def test_config_field_errors(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"tau": "half"}')
    assert main(["decompose", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "tau" in json.loads(capsys.readouterr().err)["message"]
    cfg.write_text('{"tau": 0.5,\n "bogus": 1}')
    assert main(["decompose", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "bogus" in json.loads(capsys.readouterr().err)["message"]
    cfg.write_text('{"tau": 0.5,\n')
    assert main(["decompose", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "line 2" in json.loads(capsys.readouterr().err)["message"]


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"tau": 0.9}')
    assert main(["decompose", "--config", str(cfg), "--tau", "0.5", "--out", str(tmp_path)]) == 0
    assert json.loads(capsys.readouterr().out)["tau"] == 0.5


def test_goodify_roundtrip(tmp_path, capsys):
    assert run(tmp_path / "a", "goodify") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["bad_after"] == 0
    assert run(tmp_path / "b", "goodify", "--laminate", str(tmp_path / "a" / "laminate.json"),
               "--certify") == 0


def test_synthesize_is_deterministic(tmp_path, capsys):
    args = ("synthesize", "--samples", "4096", "--grid", "8", "--seed", "7")
    assert run(tmp_path / "a", *args) == 0
    report = json.loads(capsys.readouterr().out)
    assert run(tmp_path / "b", *args) == 0
    for name in ("grid.csv", "sweep.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert -1.2 <= report["slope"] <= -0.8
    header = (tmp_path / "a" / "grid.csv").read_text().splitlines()[0].split(",")
    assert header[:4] == ["x", "y", "z", "t"] and len(header) == 19


def test_verify_reports(tmp_path, capsys):
    assert run(tmp_path, "verify", "--n", "16", "--n2d", "32", "--T", "0.2") == 0
    res = json.loads(capsys.readouterr().out)
    assert set(res) == {"beltrami", "maxwell", "2d"}
    header = (tmp_path / "maxwell.csv").read_text().splitlines()[0]
    assert header == "t,energy,crossHelicity,magneticHelicity,msmp,residual"


def test_evolve2d_writes_series(tmp_path):
    assert run(tmp_path, "evolve2d", "--n", "32", "--dt", "0.05", "--T", "0.2", "--keep", "1") == 0
    rows = (tmp_path / "evolve2d.csv").read_text().splitlines()
    assert rows[0] == "t,msmp,magnetic_energy,floor" and len(rows) == 6
    assert (tmp_path / "psi_final.f64.json").exists()


def test_evolve2d_cfl_violation(tmp_path):
    assert run(tmp_path, "evolve2d", "--n", "64", "--dt", "0.9", "--T", "0.9") == 1


@pytest.mark.parametrize("command", ["decompose", "goodify", "synthesize", "improve", "verify",
                                     "evolve2d"])
def test_help_lists_common_flags(command, capsys):
    with pytest.raises(SystemExit):
        main([command, "--help"])
    text = capsys.readouterr().out
    for flag in ("--seed", "--threads", "--out", "--config"):
        assert flag in text
