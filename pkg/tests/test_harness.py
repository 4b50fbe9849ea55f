import json
import math

import pytest

from wvtomo import harness
from wvtomo.cli import cli_entry
from wvtomo.errors import ConfigError


def small_config(**overrides):
    overrides.setdefault("n_trajectories", 4000)
    return harness.default_config(**overrides)


def test_parse_angle():
    assert harness.parse_angle(1.5) == 1.5
    assert harness.parse_angle("0.65pi") == pytest.approx(0.65 * math.pi)
    assert harness.parse_angle("pi/3") == pytest.approx(math.pi / 3)
    assert harness.parse_angle("2pi/3") == pytest.approx(2 * math.pi / 3)
    assert harness.parse_angle("-pi") == pytest.approx(-math.pi)
    assert harness.parse_angle("0.25") == 0.25
    with pytest.raises(ConfigError):
        harness.parse_angle("bogus")


def test_config_round_trip():
    cfg = harness.default_config()
    back = harness.config_from_dict(harness.config_as_dict(cfg))
    assert back == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        harness.config_from_dict({"n_trajectoriez": 10})
    with pytest.raises(ConfigError):
        harness.config_from_dict({"readout": {"kapa": 2.0}})
    with pytest.raises(ConfigError):
        harness.config_from_dict({"psi_i": {"theta": 0.5, "psi": 0.1}})


def test_config_validation():
    with pytest.raises(ConfigError):
        harness.config_from_dict({"n_trajectories": 0})
    with pytest.raises(ConfigError):
        harness.config_from_dict({"mode": "warp"})
    with pytest.raises(ConfigError):
        harness.config_from_dict({"phases": [0.0]})
    with pytest.raises(ConfigError):
        harness.config_from_dict({"eta": 0.0})


def test_t_m_resolution():
    cfg = harness.default_config()
    t_m = harness.resolve_t_m(cfg)
    from wvtomo.cavity import steady_rates

    gd = steady_rates(cfg.readout).gamma_d
    assert abs(t_m * gd - 0.5) < 1e-12
    cfg_abs = harness.config_from_dict({"readout": {"t_m": 123.0, "t_m_unit": "absolute"}})
    assert harness.resolve_t_m(cfg_abs) == 123.0


def test_csv_formatting_round_trips(tmp_path):
    rows = [harness.SweepRow(theta_f=math.pi / 3, re_wv_true=1.0 / 3.0, fidelity=0.1 + 0.2)]
    path = tmp_path / "rows.csv"
    harness.write_csv(path, rows)
    header, line = path.read_text().strip().splitlines()
    assert header == ",".join(harness.CSV_COLUMNS)
    rec = dict(zip(header.split(","), line.split(",")))
    assert float(rec["re_wv_true"]) == 1.0 / 3.0  # 17 significant digits round-trip
    assert rec["error"] == ""


def test_sweep_rows_tag_failed_rows():
    # psi_i = |1> and theta_f = pi is an orthogonal post-selection
    cfg = small_config(
        psi_i=harness.BlochAngles(0.0, 0.0),
        post_selection_sweep=(0.4 * math.pi, math.pi),
    )
    t_m = harness.resolve_t_m(cfg)
    ens = harness.build_phase_ensembles(cfg, t_m, 1.0, "stationary", seed_key=(7,))
    rows = harness.sweep_rows(cfg, ens, "stationary", ens[0].factors["stationary"].phi1,
                              "iterative")
    assert len(rows) == 2
    assert rows[0].error == ""
    assert "OrthogonalPostSelection" in rows[1].error
    assert math.isnan(rows[1].re_wv_extracted)


def test_fig1_outputs_and_determinism(tmp_path):
    cfg = small_config(n_trajectories=20_000)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    harness.run_fig1(cfg, out1)
    harness.run_fig1(harness.default_config(n_trajectories=20_000, threads=2), out2)
    for name in ("fig1_tm005.csv", "fig1_tm05.csv"):
        a = (out1 / name).read_bytes()
        b = (out2 / name).read_bytes()
        assert a == b, f"{name} differs across thread counts"
    summary = json.loads((out1 / "summary.json").read_text())
    assert summary["master_seed"] == cfg.master_seed
    assert summary["trajectories_per_s"] > 0
    # linear and iterative variants both present
    body = (out1 / "fig1_tm05.csv").read_text()
    assert ",linear," in body and ",iterative," in body


def test_fig2_and_fig4_outputs(tmp_path):
    cfg = small_config()
    outputs = harness.run_fig2_fig3(cfg, tmp_path)
    names = {p.name for p in outputs}
    assert {"fig2_eta100.csv", "fig2_eta080.csv", "summary.json"} <= names
    outputs = harness.run_fig4(cfg, tmp_path)
    fig4 = next(p for p in outputs if p.name == "fig4.csv")
    header = fig4.read_text().splitlines()[0].split(",")
    assert header == list(harness.TOMOGRAM_COLUMNS)
    lines = fig4.read_text().strip().splitlines()
    assert len(lines) == 3  # header + eta=1.0 + eta=0.8


def test_cli_fig1(tmp_path):
    out = tmp_path / "run"
    code = cli_entry(["fig1", "--n-traj", "3000", "--out", str(out)])
    assert code == 0
    assert (out / "fig1_tm005.csv").exists()
    assert (out / "fig1_tm05.csv").exists()
    assert (out / "summary.json").exists()


def test_cli_sweep_single_angle(tmp_path):
    out = tmp_path / "run"
    code = cli_entry(["sweep", "--theta-f", "0.65pi", "--eta", "0.8",
                      "--n-traj", "3000", "--out", str(out)])
    assert code == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    assert len(lines) == 2
    rec = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert float(rec["eta"]) == 0.8
    assert float(rec["rho11_true"]) == pytest.approx(0.75)


def test_cli_reconstruct(capsys):
    code = cli_entry(["reconstruct", "--re-wv", "1.0", "--im-wv", "0.0",
                      "--theta-f", "0.5pi"])
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    assert data["rho11"] == pytest.approx(1.0)


def test_cli_error_exit_codes(tmp_path, capsys):
    assert cli_entry(["fig1", "--config", "/does/not/exist.json"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"unknown_key": 1}')
    assert cli_entry(["fig1", "--config", str(bad)]) == 1
    with pytest.raises(SystemExit) as exc:
        cli_entry(["--frobnicate"])
    assert exc.value.code == 1


def test_cli_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("WVTOMO_THREADS", "2")
    out = tmp_path / "env"
    assert cli_entry(["fig4", "--n-traj", "2000", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["threads"] == 2
    monkeypatch.setenv("WVTOMO_THREADS", "zzz")
    assert cli_entry(["fig4", "--n-traj", "2000", "--out", str(out)]) == 1


def test_cli_selftest_fast():
    assert cli_entry(["selftest", "--fast"]) == 0


def test_config_file_round_trip(tmp_path):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps({
        "readout": {"kappa": 2.0, "t_m": 0.5, "t_m_unit": "inv_gamma_d"},
        "psi_i": {"theta": "pi/3", "phi": 0.662},
        "post_selection_sweep": ["0.25pi", "0.5pi"],
        "phases": [0, "pi/4"],
        "n_trajectories": 2000,
        "master_seed": 7,
        "mode": "time_resolved",
        "eta": 1.0,
        "extraction": "iterative",
        "pps_mode": "weighted",
    }))
    cfg = harness.load_config(cfg_path)
    assert cfg.readout.kappa == 2.0
    assert cfg.mode == "time_resolved"
    assert len(cfg.post_selection_sweep) == 2
