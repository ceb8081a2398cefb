import json

import numpy as np
import pytest

from squeezesim import cli
from squeezesim.experiment import (ExperimentConfig, UsageError, load_config, preset,
                                   read_csv_columns, validate)

SMALL = ["--set", "n_points=32", "--set", "x_min=-8", "--set", "x_max=8",
         "--set", "n_trajectories=20", "--set", "t_final=0.1", "--set", "n_samples=2",
         "--set", "dt=0.005"]


def test_favorable_preset_matches_caption():
    cfg = preset("favorable-couplings")
    assert cfg.N == 2000
    assert (cfg.g_aa, cfg.g_ab, cfg.g_bb) == pytest.approx((5e-3, 2.5e-3, 5e-3))
    assert cfg.x_offset_b == 0


def test_displaced_preset_matches_caption():
    cfg = preset("displaced-traps")
    assert cfg.N == 2000
    assert cfg.g_aa / cfg.g_ab == pytest.approx(1.03)
    assert cfg.g_bb / cfg.g_ab == pytest.approx(0.97)
    assert cfg.g_ab == pytest.approx(5e-3)
    assert cfg.x_offset_b == 3
    assert cfg.t_final == pytest.approx(2 * np.pi)


def test_preset_expansion_is_pure():
    assert preset("displaced-traps") == preset("displaced-traps")


def test_unknown_preset_lists_choices():
    with pytest.raises(UsageError, match="favorable-couplings, displaced-traps"):
        preset("nope")


def test_presets_validate_cleanly():
    for name in ("favorable-couplings", "displaced-traps"):
        assert not [f for f in validate(preset(name)) if f.level == "error"]


def test_validate_geometry_and_timestep():
    cfg = ExperimentConfig(x_offset_b=20)
    assert any(f.level == "error" and "grid" in f.message for f in validate(cfg))
    cfg = ExperimentConfig(dt=0.1, g_aa=0.005, N=2000)      # g N = 10
    assert any(f.level == "warning" and "phase" in f.message for f in validate(cfg))
    cfg = ExperimentConfig(n_trajectories=1)
    assert any(f.level == "error" for f in validate(cfg))
    # validation never mutates
    assert cfg == ExperimentConfig(n_trajectories=1)


def test_config_round_trip(tmp_path):
    cfg = preset("displaced-traps").replace(seed="9", dump_modes="yes")
    path = tmp_path / "c.ini"
    cfg.write(path)
    assert load_config(path) == cfg


def test_bad_override():
    with pytest.raises(UsageError):
        load_config(overrides={"not_a_key": "1"})
    with pytest.raises(UsageError):
        load_config(overrides={"dt": "fast"})


def test_cli_preset_list(capsys):
    assert cli.main(["preset", "--list"]) == 0
    assert capsys.readouterr().out.split() == ["favorable-couplings", "displaced-traps"]


def test_cli_usage_errors(tmp_path, capsys):
    assert cli.main(["preset", "bogus"]) == 2
    assert cli.main(["run", "--set", "n_trajectories=1", "-o", str(tmp_path)]) == 2
    assert cli.main(["run", "--set", "oops"]) == 2
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["validate", "--set", "x_offset_b=20"]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_validate_ok(capsys):
    assert cli.main(["validate", "--preset", "favorable-couplings"]) == 0


def test_run_deterministic_and_relaunchable(tmp_path, monkeypatch):
    out1, out2, out3 = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    args = ["run", "--preset", "favorable-couplings", *SMALL, "--set", "dump_modes=true"]
    assert cli.main([*args, "-o", str(out1)]) == 0
    monkeypatch.setenv(cli.OUTPUT_ENV, str(out2))
    assert cli.main(args) == 0
    for name in ("posp.csv", "prediction.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    assert (out1 / "modes" / "modes_0000.csv").exists()
    # re-launch from the manifest alone
    assert cli.main(["run", "--config", str(out1 / "manifest.ini"), "-o", str(out3)]) == 0
    assert (out1 / "posp.csv").read_bytes() == (out3 / "posp.csv").read_bytes()
    summary = json.loads((out1 / "summary.json").read_text())
    assert set(summary["comparison"]) == {"var_j_theta", "mean_j_nu"}
    cols = read_csv_columns(out1 / "posp.csv")
    assert cols["var_j_theta"][0] == pytest.approx(500.0)
    assert cols["trusted"].all()
    assert "untrusted_times" in (out1 / "manifest.ini").read_text()


def test_truncated_run_exit_code(tmp_path):
    args = ["run", *SMALL, "--set", "divergence_factor=1e-3", "-o", str(tmp_path)]
    assert cli.main(args) == 1
    manifest = (tmp_path / "manifest.ini").read_text()
    assert "untrusted_times = 0 0.05 0.1" in manifest
