import json
import shutil
from pathlib import Path

import pytest

from maxsum import cli

CONFIGS = Path(__file__).resolve().parent.parent / "demos" / "configs"


def _csvs(d: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))}


def test_trivial_config_passes(tmp_path, capsys):
    assert cli.main(["run", "--config", str(CONFIGS / "trivial.toml"), "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["complete"] and man["root_seed"] == 20240601 and "spawn_key" in man["seed_rule"]
    assert set(man["files"]) == {p.name for p in tmp_path.glob("*.csv")}
    assert "NOT consistent" not in capsys.readouterr().out


def test_missing_seed_exits_2_without_outputs(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("\n".join(ln for ln in (CONFIGS / "trivial.toml").read_text().splitlines()
                             if not ln.startswith("seed")))
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()
    # the seed flag supplies it
    assert cli.main(["examples", "--config", str(cfg), "--seed", "3", "--out", str(out)]) == 0


@pytest.mark.parametrize("body", ['seed = -1\n[model]\npreset = "deterministic"\n',
                                  'seed = 1\ncommands = ["dance"]\n[model]\npreset = "deterministic"\n',
                                  'seed = 1\n[model]\npreset = "compound"\n',
                                  'seed = 1\n[model]\npreset = "nope"\n',
                                  'seed = 1\n[model\n'])
def test_config_errors_exit_2(tmp_path, body):
    cfg = tmp_path / "c.toml"
    cfg.write_text(body)
    out = tmp_path / "out"
    cmd = "run" if "commands" in body else "verify"
    assert cli.main([cmd, "--config", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()


def test_rerun_and_jobs_are_byte_identical(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    cfg = str(CONFIGS / "trivial.toml")
    assert cli.main(["run", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["run", "--config", cfg, "--out", str(b)]) == 0
    assert cli.main(["run", "--config", cfg, "--out", str(c), "--jobs", "3"]) == 0
    assert _csvs(a) == _csvs(b) == _csvs(c) and _csvs(a)


def test_json_risk_config(tmp_path):
    assert cli.main(["risk", "--config", str(CONFIGS / "risk.json"), "--out", str(tmp_path)]) == 0
    header = (tmp_path / "risk.csv").read_text().splitlines()[0].split(",")
    for col in ("t", "mu", "overshoot_term", "stopped_sum", "bound_lhs", "bound_rhs"):
        assert col in header


def test_verdict_failure_exits_1(tmp_path):
    cfg = tmp_path / "wrong.toml"
    cfg.write_text('seed = 5\n[model]\npreset = "pareto_scale"\n'
                   '[characteristics]\nc = 1.0\ntail = { kind = "frechet", alpha = 2.0 }\n'
                   '[verify]\nu_grid = [0.5, 2.0]\nv_grid = [0.5]\nw_grid = [0.5]\nsamples = 2000\n')
    assert cli.main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["complete"] and not man["results"]["verify"]["verdicts"]["A"]


def test_presets_command(capsys):
    assert cli.main(["presets"]) == 0
    cat = json.loads(capsys.readouterr().out)
    assert any(e["name"] == "example2" for e in cat)


def test_console_script_installed():
    assert shutil.which("maxsum") is not None
