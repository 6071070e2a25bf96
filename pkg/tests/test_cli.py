import json

import numpy as np
import pytest

from ringattractor import ConfigError, RingConfig, validate_config
from ringattractor.cli import main
from ringattractor.experiments import ExperimentSpec, preset_config, preset_spec, run_experiment


@pytest.fixture
def fig2_json(tmp_path):
    p = tmp_path / "fig2.json"
    p.write_text(json.dumps(preset_config("fig2")))
    return p


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


# ---------------------------------------------------------------- validate_config

def test_validate_fig2_preset(fig2_json):
    cfg = validate_config(fig2_json)
    assert cfg.N == 2 and cfg.delta == 0.2 and cfg.lam == 0.1
    np.testing.assert_array_equal(cfg.sigma, [0.1, 0.1])


def test_validate_reports_every_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"N": 1, "tau": 0, "lambda": -1}))
    with pytest.raises(ConfigError) as exc:
        validate_config(p)
    msgs = exc.value.errors
    assert any("N ≥ 2" in m for m in msgs)
    assert any("tau" in m for m in msgs)
    assert any("lambda" in m for m in msgs)


def test_validate_bump_threshold(tmp_path):
    p = tmp_path / "b.json"
    p.write_text(json.dumps({"N": 50, "delta": 0.2}))
    validate_config(p)
    with pytest.raises(ConfigError) as exc:
        validate_config(p, require_bump=True)
    assert any("1/sum cos^2 = 0.08" in m for m in exc.value.errors)


def test_validate_malformed(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{")
    with pytest.raises(ConfigError, match="malformed"):
        validate_config(p)


# ---------------------------------------------------------------- experiments

def test_spec_outputs_must_match_mode():
    cfg = RingConfig(N=2)
    with pytest.raises(ConfigError):
        ExperimentSpec("x", cfg, "deterministic", ("histogram",))
    with pytest.raises(ConfigError):
        ExperimentSpec("x", cfg, "hybrid", ())


def test_preset_defaults():
    assert preset_spec("fig2").T == 2e4 and preset_spec("fig2").dt == 1e-3
    assert preset_spec("fig3").T == 100.0
    s4 = preset_spec("fig4")
    assert s4.T == 500.0 and s4.seed == 42 and s4.config.N == 50
    with pytest.raises(ConfigError):
        preset_spec("fig9")


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_run_fig3_report(tmp_path):
    rep = run_experiment(preset_spec("fig3"), tmp_path)
    assert rep.passed
    for name in rep.manifest:
        assert (tmp_path / name).stat().st_size > 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["parameters"]["T"] == 100.0
    assert any("full-ring sine threshold" in n for n in doc["notes"])


def test_run_short_fig2(tmp_path):
    rep = run_experiment(preset_spec("fig2", T=200.0), tmp_path)
    assert {"chain.csv", "path.csv", "phase.csv", "histogram_r1.csv",
            "modes_r1.json"} <= set(rep.manifest)
    assert (tmp_path / "chain.csv").read_text().startswith("t,i\n")


# ---------------------------------------------------------------- CLI

def test_cli_equilibria(capsys):
    code, out, _ = run(capsys, "equilibria", "--delta", 1.2, "--V1", 1)
    assert code == 0
    doc = json.loads(out)
    assert [e["kind"] for e in doc["equilibria"]] == ["saddle"]


def test_cli_bifurcation_is_invalid_input(capsys):
    code, _, err = run(capsys, "equilibria", "--delta", 0.5, "--V1", 1)
    assert code == 2 and "bifurcation" in err


def test_cli_invalid_config_exit_2(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"N": 1}))
    code, _, err = run(capsys, "simulate-det", "--config", p)
    assert code == 2 and "N ≥ 2" in err


def test_cli_unknown_subcommand(capsys):
    assert main(["fly"]) == 2


def test_cli_simulate_det(tmp_path, fig2_json, capsys):
    out = tmp_path / "traj.csv"
    code, stdout, _ = run(capsys, "simulate-det", "--config", fig2_json, "--T", 50,
                          "--out", out)
    assert code == 0
    np.testing.assert_allclose(json.loads(stdout)["final"], [1.25, 0.0], atol=1e-6)
    assert out.read_text().splitlines()[0] == "t,r0,r1,m_x,m_y,active_set"


def test_cli_global_flags_before_subcommand(tmp_path, fig2_json, capsys):
    code, stdout, _ = run(capsys, "--config", fig2_json, "--out-dir", tmp_path,
                          "simulate-sde", "--T", 2)
    assert code == 0
    assert (tmp_path / "path.csv").exists()


def test_cli_simulate_sde_seeded(tmp_path, fig2_json, capsys):
    for name in ("a.csv", "b.csv"):
        run(capsys, "simulate-sde", "--config", fig2_json, "--T", 5, "--seed", 3,
            "--out", tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().startswith("t,i,r0,r1\n")


def test_cli_divergence_exit_3(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"N": 2, "delta": 1.2, "V": [1, 0]}))
    code, _, err = run(capsys, "simulate-det", "--config", p, "--T", 500,
                       "--x0", "0.143857,0.856143", "--out-dir", tmp_path)
    assert code == 3 and "numerical failure" in err


def test_cli_bump(tmp_path, capsys):
    code, stdout, _ = run(capsys, "bump", "--N", 50, "--delta", 0.05, "--out-dir", tmp_path)
    assert code == 0
    doc = json.loads(stdout)
    assert doc["m_x"] == pytest.approx(8 / 3)
    assert doc["warnings"]
    code, _, err = run(capsys, "bump", "--N", 50, "--delta", 0.2)
    assert code == 2 and "0.08" in err


def test_cli_moments(tmp_path, capsys):
    code, stdout, _ = run(capsys, "moments", "--x0", "0,1,0,0", "--out-dir", tmp_path)
    assert code == 0
    np.testing.assert_allclose(json.loads(stdout)["last"], [0, 1, 1, np.pi / 2], atol=1e-12)


def test_cli_generator_check(fig2_json, capsys):
    code, stdout, _ = run(capsys, "generator-check", "--config", fig2_json,
                          "--x0", "0.5,0.2", "--function", "x1sq", "--samples", 20000)
    assert code == 0 and json.loads(stdout)["passed"]


def test_cli_lyapunov_check(fig2_json, capsys):
    code, stdout, _ = run(capsys, "lyapunov-check", "--config", fig2_json, "--alpha", 1.5)
    assert code == 0 and json.loads(stdout)["failures"] == 0
    code, _, _ = run(capsys, "lyapunov-check", "--config", fig2_json, "--alpha", 1.55)
    assert code == 2


def test_cli_moment_check(tmp_path, fig2_json, capsys):
    code, stdout, _ = run(capsys, "moment-check", "--config", fig2_json, "--T", 5,
                          "--replicas", 50, "--x0", "5,5", "--out-dir", tmp_path)
    assert code == 0 and json.loads(stdout)["passed"]


def test_cli_ergodic(tmp_path, fig2_json, capsys):
    code, stdout, _ = run(capsys, "ergodic", "--config", fig2_json, "--T", 500,
                          "--out-dir", tmp_path, "--x0-b", "5,5", "--i0-b", 2)
    assert code in (0, 1)
    doc = json.loads(stdout)
    assert "agreement" in doc and (tmp_path / "histogram_r0.csv").exists()


def test_cli_run_preset_fig3(tmp_path, capsys):
    code, stdout, _ = run(capsys, "run-preset", "fig3", "--out-dir", tmp_path)
    assert code == 0
    assert json.loads(stdout)["passed"]
    assert (tmp_path / "fig3" / "bump.csv").exists()
