import json
import math

import numpy as np
import pytest

from twophoton.cli import (
    EXIT_ACCEPT,
    EXIT_CONFIG,
    emit_csv,
    main,
    run_scenario,
)
from twophoton.config import ConfigError, config_summary, parse_config, parse_config_file
from twophoton.presets import PRESETS, PeakTarget, ScenarioPreset, get_preset
from twophoton.pulses import vacuum


GOOD_CONFIG = """\
# example scenario
params.kappa1 = 1.0
params.kappa2 = 0.0
params.r = 0.70710678118654752
params.eta = g
pulse1.kind = gaussian
pulse1.omega = 1.46
pulse1.tau = 3.0
pulse2.kind = vacuum
scheme.kind = hh
run.dt = 0.001
run.n_traj = 0
run.seed = 3
"""


def write_config(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text, encoding="utf-8")
    return str(p)


# -- config parsing -----------------------------------------------------------


def test_parse_preset_name():
    cfg = parse_config("fig3a_black")
    assert cfg.params.kappa1 == 1.0
    assert cfg.params.kappa2 == 0.0
    assert cfg.params.pulse1.kind == "rising_exp"
    assert cfg.params.pulse1.gamma == 1.0
    assert cfg.params.pulse2 == vacuum()
    assert cfg.params.r == pytest.approx(1 / math.sqrt(2))
    assert np.allclose(cfg.params.eta, [0.0, 1.0])


def test_parse_config_file_roundtrip(tmp_path):
    cfg = parse_config_file(write_config(tmp_path, GOOD_CONFIG))
    assert cfg.params.pulse1.omega == 1.46
    assert cfg.dt == 0.001
    assert cfg.seed == 3
    summary = config_summary(cfg)
    assert summary["pulse1"] == {"kind": "gaussian", "omega": 1.46, "tau": 3.0}
    assert summary["scheme"] == "hh"
    json.dumps(summary)  # serializable


def test_parse_rejects_unknown_key(tmp_path):
    bad = GOOD_CONFIG + "run.banana = 1\n"
    with pytest.raises(ConfigError):
        parse_config_file(write_config(tmp_path, bad))


def test_parse_rejects_out_of_range_r(tmp_path):
    bad = GOOD_CONFIG.replace("params.r = 0.70710678118654752", "params.r = 1.5")
    with pytest.raises(ConfigError):
        parse_config_file(write_config(tmp_path, bad))


def test_parse_rejects_zero_dt(tmp_path):
    bad = GOOD_CONFIG.replace("run.dt = 0.001", "run.dt = 0")
    with pytest.raises(ConfigError):
        parse_config_file(write_config(tmp_path, bad))


def test_parse_rejects_missing_file():
    with pytest.raises(ConfigError):
        parse_config("/nonexistent/path.cfg")


def test_parse_rejects_duplicate_and_malformed(tmp_path):
    with pytest.raises(ConfigError):
        parse_config_file(write_config(tmp_path, "params.kappa1 = 1\nparams.kappa1 = 2\n"))
    with pytest.raises(ConfigError):
        parse_config_file(write_config(tmp_path, "params.kappa1\n"))


def test_parse_eta_forms(tmp_path):
    cfg = parse_config_file(
        write_config(tmp_path, GOOD_CONFIG.replace("params.eta = g", "params.eta = e"))
    )
    assert np.allclose(cfg.params.eta, [1.0, 0.0])
    cfg = parse_config_file(
        write_config(
            tmp_path,
            GOOD_CONFIG.replace("params.eta = g", "params.eta = 0.6, 0.8"),
        )
    )
    assert np.allclose(cfg.params.eta, [0.6, 0.8])
    with pytest.raises(ConfigError):
        parse_config_file(
            write_config(
                tmp_path,
                GOOD_CONFIG.replace("params.eta = g", "params.eta = 1.0, 1.0"),
            )
        )


# -- CSV emission --------------------------------------------------------------


def test_emit_csv_four_columns_without_trajectories(tmp_path):
    times = np.array([0.0, 0.1, 0.2])
    pe = np.array([0.0, 0.5, 1.0 / 3.0])
    path = tmp_path / "c.csv"
    emit_csv(path, times, pe_master=pe)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,pe_master,pe_mean,pe_stderr"
    assert len(lines) == 4


def test_emit_csv_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    times = np.linspace(0, 1, 7)
    pe = rng.random(7)
    traj = rng.random((2, 7))
    path = tmp_path / "c.csv"
    emit_csv(path, times, pe_master=pe, pe_mean=pe, pe_stderr=0 * pe, pe_traj=traj)
    lines = path.read_text().splitlines()
    assert lines[0].endswith("pe_traj_0,pe_traj_1")
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    # re-printing the parsed values reproduces the file exactly
    for k, line in enumerate(lines[1:]):
        reprinted = ",".join("%.12g" % v for v in data[k])
        assert reprinted == line


# -- scenario runs --------------------------------------------------------------


def test_run_scenario_master_only(tmp_path):
    preset = get_preset("fig3a_blue")
    cfg = preset.cfg.with_overrides(dt=1e-3)
    report = run_scenario(
        cfg, {"master"}, name="fig3a_blue", preset=preset, out_dir=tmp_path
    )
    assert report["acceptance"]["pass"] is True
    peak = report["peaks"]["master_global"]
    assert peak["pe"] == pytest.approx(0.5, abs=0.02)
    csv_path = tmp_path / "fig3a_blue_curves.csv"
    assert csv_path.exists()
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    assert data[:, 1].max() == pytest.approx(0.5, abs=0.02)
    assert np.all(np.isnan(data[:, 2]))  # no trajectories requested
    assert (tmp_path / "fig3a_blue_pe.png").exists()
    assert (tmp_path / "report.json").exists()
    loaded = json.loads((tmp_path / "report.json").read_text())
    assert loaded["metadata"]["preset"] == "fig3a_blue"


def test_run_scenario_with_trajectories(tmp_path):
    preset = get_preset("fig4a")
    cfg = preset.cfg.with_overrides(dt=2e-3, n_traj=4, seed=7)
    report = run_scenario(
        cfg,
        {"master", "ensemble"},
        name="fig4a",
        preset=preset,
        out_dir=tmp_path,
        csv_traj=3,
        plot=False,
    )
    data = np.loadtxt(tmp_path / "fig4a_curves.csv", delimiter=",", skiprows=1)
    assert data.shape[1] == 4 + 3
    assert not np.any(np.isnan(data[:, 2]))
    assert len(report["peaks"]["trajectory"]) == 4
    assert report["diagnostics"]["ensemble"]["failed_trajectories"] == []


def test_cli_list_presets(capsys):
    assert main(["list-presets"]) == 0
    out = capsys.readouterr().out
    for name in PRESETS:
        assert name in out


def test_cli_run_unknown_scenario(capsys):
    assert main(["run", "not_a_preset"]) == EXIT_CONFIG


def test_cli_run_bad_config_file(tmp_path, capsys):
    bad = write_config(tmp_path, GOOD_CONFIG.replace("= 0.001", "= -1"))
    assert main(["run", bad]) == EXIT_CONFIG


def test_cli_run_preset_end_to_end(tmp_path, capsys):
    rc = main(
        ["run", "fig3a_blue", "--dt", "1e-3", "--out", str(tmp_path), "--no-plot"]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "master peak" in out
    assert (tmp_path / "fig3a_blue_curves.csv").exists()


def test_cli_run_config_file_with_trajectories(tmp_path, capsys):
    cfgfile = write_config(tmp_path, GOOD_CONFIG)
    rc = main(
        ["run", cfgfile, "--traj", "3", "--seed", "5", "--dt", "2e-3",
         "--out", str(tmp_path), "--no-plot"]
    )
    assert rc == 0
    data = np.loadtxt(tmp_path / "run_curves.csv", delimiter=",", skiprows=1)
    assert data.shape[1] == 7  # 4 + min(3, csv_traj default 8)


def test_cli_check_passes(tmp_path, capsys):
    rc = main(["check", "fig3a_blue", "--dt", "1e-3", "--out", str(tmp_path),
               "--no-plot"])
    assert rc == 0
    assert "pass" in capsys.readouterr().out


def test_cli_check_fails_on_wrong_target(tmp_path, capsys, monkeypatch):
    bogus = ScenarioPreset(
        name="bogus",
        description="deliberately wrong reference peak",
        cfg=get_preset("fig3a_blue").cfg,
        targets=(PeakTarget(pe=0.99),),
    )
    monkeypatch.setitem(PRESETS, "bogus", bogus)
    rc = main(["check", "bogus", "--dt", "1e-3", "--out", str(tmp_path),
               "--no-plot"])
    assert rc == EXIT_ACCEPT
    assert "FAIL" in capsys.readouterr().out


def test_cli_check_unknown_preset():
    assert main(["check", "nope"]) == EXIT_CONFIG


def test_cli_numerical_failure_exit_code(tmp_path):
    # an absurd coupling makes the click probability per step exceed the
    # runtime guard, which must surface as the numerical-failure exit code
    from twophoton.cli import EXIT_NUMERICAL

    bad = GOOD_CONFIG.replace("params.kappa1 = 1.0", "params.kappa1 = 2000.0")
    bad = bad.replace("params.eta = g", "params.eta = e")
    bad = bad.replace("scheme.kind = hh", "scheme.kind = hp")
    bad = bad.replace("run.n_traj = 0", "run.n_traj = 1")
    cfgfile = write_config(tmp_path, bad)
    rc = main(["run", cfgfile, "--out", str(tmp_path), "--no-plot"])
    assert rc == EXIT_NUMERICAL


def test_cli_run_oracle_output(tmp_path):
    cfgfile = write_config(
        tmp_path,
        GOOD_CONFIG.replace("run.dt = 0.001", "run.dt = 0.005"),
    )
    rc = main(
        ["run", cfgfile, "--oracle", "--dt", "5e-3", "--out", str(tmp_path),
         "--no-plot"]
    )
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert "oracle" in report["diagnostics"]
    assert report["diagnostics"]["oracle"]["sup_pe_gap"] < 0.05
