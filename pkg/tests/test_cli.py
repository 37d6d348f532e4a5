import json
import subprocess
import sys

import pytest
import tomli_w

from disinfo.cli import main, parse_alphas
from disinfo.scenario import default_scenario_text, parse_scenario, to_dict

from .test_scenario import MINIMAL


def write_scenario(path, base=MINIMAL, **edits):
    """Scenario file from ``base`` with ``section__key=value`` edits."""
    doc = to_dict(parse_scenario(base))
    for name, value in edits.items():
        section, key = name.split("__")
        doc[section][key] = value
    path.write_text(tomli_w.dumps(doc), encoding="utf-8")
    return str(path)


SMALL_CONTROL = dict(integration__T=5.0, integration__n_steps=250, control__omega=0.3)


def test_parse_alphas():
    assert parse_alphas("0.1:0.3:3") == pytest.approx([0.1, 0.2, 0.3])
    assert parse_alphas("0.01:1:3", log_spaced=True) == pytest.approx([0.01, 0.1, 1.0])
    assert parse_alphas("0.5:0.5:1") == [0.5]
    for bad in ("0.1:0.3", "0.3:0.1:4", "0.1:0.3:0", "a:b:c"):
        with pytest.raises(ValueError):
            parse_alphas(bad)
    with pytest.raises(ValueError):
        parse_alphas("0:1:4", log_spaced=True)


def test_unknown_subcommand_exit_2(capsys):
    assert main(["bogus"]) == 2
    assert "usage" in capsys.readouterr().err


def test_invalid_scenario_exit_2(tmp_path, capsys):
    sc = write_scenario(tmp_path / "bad.toml", params__beta=-0.1)
    assert main(["simulate", "--scenario", sc, "--out", str(tmp_path / "o.csv")]) == 2
    assert "params.beta: must be ≥ 0" in capsys.readouterr().err
    assert not (tmp_path / "o.csv").exists()


def test_missing_file_exit_2(tmp_path):
    assert main(["simulate", "--scenario", str(tmp_path / "nope.toml"), "--out", str(tmp_path / "o.csv")]) == 2


def test_non_convergence_exit_3(tmp_path, capsys):
    sc = write_scenario(tmp_path / "s.toml", control__max_iter=2, **SMALL_CONTROL)
    argv = ["optimize", "--scenario", sc, "--out-states", str(tmp_path / "x.csv"),
            "--out-controls", str(tmp_path / "u.csv")]
    assert main(argv) == 3
    assert "did not converge" in capsys.readouterr().err


def test_non_monotonic_bracket_exit_4(tmp_path):
    sc = write_scenario(tmp_path / "s.toml", base=default_scenario_text(), tipping__alpha_hi=0.1)
    assert main(["tip", "--scenario", sc, "--out", str(tmp_path / "t.json")]) == 4


def test_blowup_exit_5(tmp_path):
    sc = write_scenario(
        tmp_path / "s.toml", params__beta=50.0, params__p=1.0, params__r=0.0, params__gamma=0.0,
        initial__S=1e6, initial__I=1e6, initial__E=0.0, initial__C=0.0, initial__Z=0.0,
    )
    assert main(["simulate", "--scenario", sc, "--out", str(tmp_path / "o.csv")]) == 5


def test_simulate_default(tmp_path):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    n_steps = parse_scenario(default_scenario_text()).grid.n_steps
    assert lines[0] == "t,S,E,C,I,Z,F"
    assert len(lines) - 1 == n_steps + 1
    manifest = json.loads((tmp_path / "sim.manifest.json").read_text())
    assert manifest["subcommand"] == "simulate"
    assert manifest["outputs"] == [str(out)]
    assert len(manifest["scenario_sha256"]) == 64


def test_simulate_byte_identical(tmp_path):
    sc = write_scenario(tmp_path / "s.toml")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--scenario", sc, "--out", str(a)]) == 0
    assert main(["simulate", "--scenario", sc, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    ma = json.loads((tmp_path / "a.manifest.json").read_text())
    mb = json.loads((tmp_path / "b.manifest.json").read_text())
    ma.pop("runtime_s"), mb.pop("runtime_s")
    ma.pop("outputs"), mb.pop("outputs")
    assert ma == mb


def test_optimize_byte_identical(tmp_path):
    sc = write_scenario(tmp_path / "s.toml", **SMALL_CONTROL)
    outs = []
    for tag in "ab":
        x, u = tmp_path / f"x{tag}.csv", tmp_path / f"u{tag}.csv"
        assert main(["optimize", "--scenario", sc, "--out-states", str(x), "--out-controls", str(u)]) == 0
        outs.append((x.read_bytes(), u.read_bytes()))
    assert outs[0] == outs[1]
    assert outs[0][0].decode().splitlines()[0] == "t,S,E,C,I,Z,F,u1,u2,u3,u4"
    assert outs[0][1].decode().splitlines()[0] == "t,u1,u2,u3,u4"
    summary = json.loads((tmp_path / "xa.manifest.json").read_text())["summary"]
    assert summary["J"] <= summary["J_uncontrolled"] + 1e-9


def test_sweep_and_tip(tmp_path):
    sw = tmp_path / "sweep.csv"
    assert main(["sweep", "--alphas", "0.05:2:6", "--log", "--out", str(sw)]) == 0
    rows = sw.read_text().splitlines()
    assert rows[0] == "alpha,outcome,distance,peak_C,peak_I,error"
    outcomes = [r.split(",")[1] for r in rows[1:]]
    assert outcomes[0] == "Track" and outcomes[-1] == "Tip"
    tip = tmp_path / "tip.json"
    assert main(["tip", "--out", str(tip)]) == 0
    rec = json.loads(tip.read_text())
    assert rec["bracket"][0] < rec["alpha_c"] < rec["bracket"][1]
    assert [v["outcome"] for v in rec["verdicts"]] == ["Track", "Tip"]


def test_check_gradient(tmp_path, capsys):
    sc = write_scenario(tmp_path / "s.toml", **SMALL_CONTROL)
    out = tmp_path / "g.csv"
    assert main(["check-gradient", "--scenario", sc, "--trials", "2", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 3
    assert main(["check-gradient", "--scenario", sc, "--trials", "1", "--threshold", "1e-30",
                 "--manifest", str(tmp_path / "m.json")]) == 1
    assert capsys.readouterr().out.startswith("trial,adjoint")


def test_console_script_exit_code(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "disinfo.cli", "simulate", "--out", str(tmp_path / "o.csv"),
         "--scenario", str(tmp_path / "missing.toml")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
    assert proc.stdout == "" and "error" in proc.stderr
