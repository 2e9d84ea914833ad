"""Config-layer and command-line tests.

CLI subcommands run as real subprocesses (``python -m pivotsim.cli ...``) so
argument parsing, exit codes, and artifact files are exercised end to end on
deliberately tiny workloads."""

import csv
import json
import logging
import os
import subprocess
import sys

import numpy as np
import pytest

from pivotsim.config import (
    ConfigError,
    config_from_dict,
    config_to_dict,
    default_config,
    dump_config,
    load_config,
    tool1,
    tool2,
)
from pivotsim.policy import load_checkpoint


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "pivotsim.cli", *args],
        capture_output=True, text=True, cwd=cwd,
    )


def tiny_config(tmp_path, **overrides):
    """A config small enough for subsecond training runs."""
    os.makedirs(tmp_path, exist_ok=True)
    data = {
        "mdp": {"horizon": 8},
        "trpo": {"episodes_per_iter": 2, "baseline_epochs": 2},
        "eval": {"n_episodes": 2, "step_cap": 8},
        "sweep": {"friction_multipliers": [0.5, 1.0], "episodes_per_point": 2},
        "iterations": 3,
        "eval_every": 2,
        "checkpoint_every": 2,
        "output_dir": str(tmp_path / "run"),
    }
    data.update(overrides)
    path = str(tmp_path / "config.json")
    with open(path, "w") as fh:
        json.dump(data, fh)
    return path, data


# -- config layer -----------------------------------------------------------------


def test_default_config_is_valid():
    cfg = default_config()
    cfg.validate()
    assert cfg.tool == tool1()


def test_tool_presets_table_values():
    t1, t2 = tool1(), tool2()
    assert (t1.inertia, t1.mass, t1.com_distance, t1.rest_finger_distance) == (
        0.00006943, 0.026, 0.089, 0.0188
    )
    assert (t2.inertia, t2.mass, t2.com_distance, t2.rest_finger_distance) == (
        0.0001111, 0.033, 0.1, 0.0162
    )
    fric = default_config().friction
    assert (fric.viscous, fric.coulomb_stiffness) == (0.066, 9.906)
    assert fric.static_stiffness == 9.906  # defaults to the Coulomb composite


def test_config_dict_round_trip():
    cfg = default_config()
    again = config_from_dict(config_to_dict(cfg))
    assert again == cfg


def test_config_file_round_trip(tmp_path):
    path = str(tmp_path / "cfg.json")
    cfg = default_config()
    dump_config(cfg, path)
    assert load_config(path) == cfg


def test_config_section_override():
    cfg = config_from_dict({"mdp": {"horizon": 25}, "master_seed": 9})
    assert cfg.mdp.horizon == 25
    assert cfg.master_seed == 9
    assert cfg.trpo == default_config().trpo


def test_config_unknown_key_rejected():
    with pytest.raises(ConfigError, match=r"mdp\.dtt"):
        config_from_dict({"mdp": {"dtt": 0.1}})
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"nonsense_section": {}})


def test_config_invalid_values_aggregated():
    with pytest.raises(ConfigError) as ei:
        config_from_dict({"mdp": {"horizon": 0}, "trpo": {"kl_step": -1.0}})
    msg = str(ei.value)
    assert "mdp.horizon" in msg and "trpo.kl_step" in msg


def test_config_coulomb_override_refreshes_static_default():
    cfg = config_from_dict({"friction": {"coulomb_stiffness": 5.0}})
    assert cfg.friction.coulomb_stiffness == 5.0
    assert cfg.friction.static_stiffness == 5.0


def test_config_tool2_preset_warns_about_friction(caplog):
    with caplog.at_level(logging.WARNING):
        cfg = config_from_dict({"tool_preset": "tool2"})
    assert cfg.tool == tool2()
    assert any("friction" in r.message for r in caplog.records)


def test_config_policy_shape_cross_checked():
    with pytest.raises(ConfigError, match="observation"):
        config_from_dict({"policy": {"layer_sizes": [4, 8, 2]}})
    with pytest.raises(ConfigError, match="action"):
        config_from_dict({"policy": {"layer_sizes": [5, 8, 3]}})


# -- CLI: print-config --------------------------------------------------------------


def test_cli_print_config_defaults():
    res = run_cli("print-config")
    assert res.returncode == 0
    doc = json.loads(res.stdout)
    assert doc["tool"]["mass"] == 0.026
    assert doc["trpo"]["episodes_per_iter"] == 50
    assert config_from_dict(doc) == default_config()


def test_cli_print_config_reflects_file(tmp_path):
    path, _ = tiny_config(tmp_path)
    res = run_cli("print-config", "--config", path)
    assert res.returncode == 0
    doc = json.loads(res.stdout)
    assert doc["mdp"]["horizon"] == 8
    assert doc["iterations"] == 3


def test_cli_rejects_bad_config(tmp_path):
    path = str(tmp_path / "bad.json")
    with open(path, "w") as fh:
        json.dump({"mdp": {"horizon": -1}}, fh)
    res = run_cli("print-config", "--config", path)
    assert res.returncode == 1
    assert res.stderr.startswith("error:")


# -- CLI: train ----------------------------------------------------------------------


def test_cli_train_artifacts(tmp_path):
    path, data = tiny_config(tmp_path)
    res = run_cli("train", "--config", path)
    assert res.returncode == 0, res.stderr
    out = data["output_dir"]
    for name in (
        "resolved_config.json", "training_log.csv", "eval_log.csv",
        "checkpoint_00002.json", "checkpoint_final.json",
    ):
        assert os.path.exists(os.path.join(out, name)), name
    with open(os.path.join(out, "training_log.csv")) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == [
        "iteration", "avg_return", "avg_steps_to_goal", "success_rate",
        "mean_kl", "surrogate_improvement", "step_accepted", "wall_time_s",
    ]
    assert len(rows) == 4 and [r[0] for r in rows[1:]] == ["0", "1", "2"]
    with open(os.path.join(out, "eval_log.csv")) as fh:
        erows = list(csv.reader(fh))
    assert erows[0] == ["iteration", "avg_reward", "avg_steps_to_goal", "success_rate"]
    assert len(erows) == 2  # one eval at iteration 2 of 3
    policy, baseline, extra = load_checkpoint(os.path.join(out, "checkpoint_final.json"))
    assert baseline is not None
    assert extra["iteration"] == 3 and extra["master_seed"] == 0
    resolved = json.load(open(os.path.join(out, "resolved_config.json")))
    assert resolved["mdp"]["horizon"] == 8


def test_cli_train_resume_matches_straight_run(tmp_path):
    cfg4, d4 = tiny_config(tmp_path / "a", iterations=4, output_dir=str(tmp_path / "a/run"))
    os.makedirs(tmp_path / "a", exist_ok=True)
    res = run_cli("train", "--config", cfg4)
    assert res.returncode == 0, res.stderr

    os.makedirs(tmp_path / "b", exist_ok=True)
    cfg2, d2 = tiny_config(tmp_path / "b", iterations=2, output_dir=str(tmp_path / "b/run"))
    res = run_cli("train", "--config", cfg2)
    assert res.returncode == 0, res.stderr
    ck = os.path.join(d2["output_dir"], "checkpoint_final.json")
    ck_bytes = open(ck, "rb").read()

    res = run_cli(
        "train", "--config", cfg2, "--checkpoint", ck,
        "--iterations", "4", "--out", str(tmp_path / "b/resumed"),
    )
    assert res.returncode == 0, res.stderr
    assert open(ck, "rb").read() == ck_bytes  # input checkpoint untouched

    def log_rows(out):
        with open(os.path.join(out, "training_log.csv")) as fh:
            return list(csv.reader(fh))

    straight = log_rows(d4["output_dir"])
    resumed = log_rows(str(tmp_path / "b/resumed"))
    assert [r[0] for r in resumed[1:]] == ["2", "3"]
    # identical learning trajectory, ignoring wall-clock
    strip = lambda row: row[:-1]
    assert [strip(r) for r in resumed[1:]] == [strip(r) for r in straight[3:]]
    final_a = load_checkpoint(os.path.join(d4["output_dir"], "checkpoint_final.json"))
    final_b = load_checkpoint(os.path.join(str(tmp_path / "b/resumed"), "checkpoint_final.json"))
    np.testing.assert_array_equal(
        np.asarray(final_a[0].log_std), np.asarray(final_b[0].log_std)
    )


def test_cli_train_rerun_bit_identical(tmp_path):
    outs = []
    for name in ("r1", "r2"):
        cfg, data = tiny_config(
            tmp_path / name, output_dir=str(tmp_path / name / "run")
        )
        os.makedirs(tmp_path / name, exist_ok=True)
        res = run_cli("train", "--config", cfg)
        assert res.returncode == 0, res.stderr
        outs.append(data["output_dir"])

    def canon_log(out):
        with open(os.path.join(out, "training_log.csv")) as fh:
            rows = list(csv.reader(fh))
        drop = rows[0].index("wall_time_s")
        return [[c for i, c in enumerate(r) if i != drop] for r in rows]

    assert canon_log(outs[0]) == canon_log(outs[1])
    for name in ("checkpoint_final.json", "checkpoint_00002.json", "eval_log.csv"):
        a = open(os.path.join(outs[0], name), "rb").read()
        b = open(os.path.join(outs[1], name), "rb").read()
        assert a == b, name


# -- CLI: eval / sweep / cycle / rollout ----------------------------------------------


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """One tiny trained checkpoint shared by the read-only subcommand tests."""
    tmp = tmp_path_factory.mktemp("cli_shared")
    cfg, data = tiny_config(tmp, output_dir=str(tmp / "run"))
    res = run_cli("train", "--config", cfg)
    assert res.returncode == 0, res.stderr
    return cfg, os.path.join(data["output_dir"], "checkpoint_final.json"), tmp


def test_cli_eval(trained):
    cfg, ck, tmp = trained
    res = run_cli("eval", "--config", cfg, "--checkpoint", ck, "--out", str(tmp / "ev"))
    assert res.returncode == 0, res.stderr
    doc = json.loads(res.stdout)
    assert set(doc) == {"n_episodes", "avg_reward", "avg_steps_to_goal", "success_rate"}
    saved = json.load(open(tmp / "ev" / "eval_summary.json"))
    assert saved == doc


def test_cli_sweep(trained):
    cfg, ck, tmp = trained
    res = run_cli("sweep", "--config", cfg, "--checkpoint", ck, "--out", str(tmp / "sw"))
    assert res.returncode == 0, res.stderr
    with open(tmp / "sw" / "sweep_results.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "multiplier"
    assert [r[0] for r in rows[1:]] == ["0.5", "1.0"]
    summary = json.load(open(tmp / "sw" / "sweep_summary.json"))
    assert len(summary["rows"]) == 2


def test_cli_cycle(trained):
    cfg, ck, tmp = trained
    res = run_cli(
        "cycle", "--config", cfg, "--checkpoint", ck,
        "--repeats", "2", "--out", str(tmp / "cy"),
    )
    assert res.returncode == 0, res.stderr
    with open(tmp / "cy" / "cycle_results.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 12  # header + 6 targets x 2 repeats
    summary = json.load(open(tmp / "cy" / "cycle_summary.json"))
    assert set(summary) >= {"success_rate", "avg_steps"}


def test_cli_rollout(trained):
    cfg, ck, tmp = trained
    res = run_cli(
        "rollout", "--config", cfg, "--checkpoint", ck,
        "--init-deg", "10", "--target-deg", "-45", "--out", str(tmp / "ro"),
    )
    assert res.returncode == 0, res.stderr
    with open(tmp / "ro" / "trajectory.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:4] == ["t", "tool_angle", "target", "angle_error"]
    first = [float(v) for v in rows[1]]
    assert first[1] == pytest.approx(np.radians(10), abs=1e-12)
    assert first[2] == pytest.approx(np.radians(-45), abs=1e-12)


def test_cli_eval_requires_checkpoint(trained):
    cfg, _, _ = trained
    res = run_cli("eval", "--config", cfg)
    assert res.returncode == 2  # argparse usage error


def test_cli_bad_checkpoint_path(trained, tmp_path):
    cfg, _, _ = trained
    res = run_cli(
        "eval", "--config", cfg,
        "--checkpoint", str(tmp_path / "missing.json"),
        "--out", str(tmp_path / "o"),
    )
    assert res.returncode == 1
    assert res.stderr.startswith("error:")
