import csv
import subprocess
import sys

import numpy as np
import pytest
import yaml

from koopman_lyap.cli import main
from koopman_lyap.config import ExperimentConfig, load_config
from koopman_lyap.experiments import read_summary

SMALL = {
    "n_traj": 6,
    "horizon": 1.0,
    "grid": {"lo": [-1.0, -1.0], "hi": [1.0, 1.0], "per_dim": 5},
    "fill_grid_per_dim": 20,
    "oracle": {"tol": 1e-6, "t_max": 2000, "degree_max": 3},
    "trend": {"sample_sizes": [2, 4, 6]},
    "predict": {"initial_states": [[0.5, 0.5]], "steps": 5},
}


def write_config(tmp_path, **overrides):
    data = yaml.safe_load(yaml.safe_dump(SMALL))
    data.update(overrides)
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("mode, files", [
    ("spectrum", ["spectrum_estimated.csv", "spectrum_exact.csv"]),
    ("lyapunov", ["lyapunov_grid.csv"]),
    ("trend", ["trend.csv"]),
    ("predict", ["predict_0.csv"]),
])
def test_modes_write_artifacts_and_resolved_config(tmp_path, mode, files):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main([mode, "--config", str(cfg), "--out", str(out)]) == 0
    for name in files + ["summary.txt", "config_resolved.yaml"]:
        assert (out / name).is_file()
    resolved = load_config(out / "config_resolved.yaml")
    assert resolved.mode == mode and resolved.outputs == str(out)
    # every field is spelled out, not just the overrides
    keys = set(yaml.safe_load((out / "config_resolved.yaml").read_text()))
    assert keys == set(ExperimentConfig().to_dict())


def test_spectrum_exact_file(tmp_path):
    cfg = write_config(tmp_path, system={"name": "brusselator", "params": {}})
    out = tmp_path / "out"
    assert main(["spectrum", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "spectrum_exact.csv")
    assert rows[0] == ["re", "im", "modulus", "degree"]
    moduli = [float(r[2]) for r in rows[1:]]
    assert max(moduli) == pytest.approx(np.exp(-0.1), abs=1e-11)
    assert rows[-1][:3] == ["0", "0", "0"]
    summary = read_summary(out / "summary.txt")
    assert float(summary["spectral_radius_exact"]) == pytest.approx(np.exp(-0.1), abs=1e-11)


def test_same_seed_gives_identical_files(tmp_path):
    cfg = write_config(tmp_path)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["spectrum", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["spectrum", "--config", str(cfg), "--out", str(b)]) == 0
    assert main(["spectrum", "--config", str(cfg), "--out", str(c), "--seed", "7"]) == 0
    name = "spectrum_estimated.csv"
    assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / name).read_bytes() != (c / name).read_bytes()
    assert load_config(c / "config_resolved.yaml").seed == 7


def test_lyapunov_grid_with_origin(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["lyapunov", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "lyapunov_grid.csv")
    assert rows[0] == ["x1", "x2", "v_hat", "v_oracle", "v_lin", "decay_violation"]
    origin = [r for r in rows[1:] if float(r[0]) == 0 and float(r[1]) == 0]
    assert len(origin) == 1 and float(origin[0][2]) == 0.0
    summary = read_summary(out / "summary.txt")
    slack = float(summary["decay_slack"])
    viol = np.array([float(r[5]) for r in rows[1:]])
    assert np.mean(viol <= slack) == pytest.approx(float(summary["decay_fraction"]))


def test_trend_rows(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["trend", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "trend.csv")[1:]
    assert [int(r[0]) for r in rows] == [2, 4, 6]
    h = [float(r[2]) for r in rows]
    assert all(a > b for a, b in zip(h, h[1:]))
    err = np.array([float(r[3]) for r in rows])
    assert np.all(np.isfinite(err)) and np.all(err >= 0)


def test_predict_from_origin_and_zero_steps(tmp_path):
    cfg = write_config(tmp_path, predict={"initial_states": [[0.0, 0.0], [0.5, -0.5]], "steps": 4})
    out = tmp_path / "out"
    assert main(["predict", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "predict_0.csv")
    assert rows[0] == ["t", "x_true_1", "x_true_2", "x_pred_1", "x_pred_2", "deviation", "status"]
    assert len(rows) == 6 and all(float(r[5]) == 0.0 for r in rows[1:])

    cfg = write_config(tmp_path, predict={"initial_states": [[0.5, 0.5]], "steps": 0})
    out = tmp_path / "zero"
    assert main(["predict", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "predict_0.csv")
    assert len(rows) == 2 and rows[1][0] == "0"


def test_nonempty_output_dir_is_config_error(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    out.mkdir()
    (out / "stale.txt").write_text("x")
    assert main(["spectrum", "--config", str(cfg), "--out", str(out)]) == 2


def test_trend_with_single_size_is_config_error(tmp_path):
    cfg = write_config(tmp_path, trend={"sample_sizes": [6]})
    assert main(["trend", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 2


def test_unknown_system_is_config_error(tmp_path):
    cfg = write_config(tmp_path, system={"name": "duffing", "params": {}})
    assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 2


def test_ill_conditioned_fit_is_numerical_error(tmp_path):
    # a sample at the origin makes the unregularized Gram matrix singular
    cfg = write_config(tmp_path, system={"name": "linear_map", "params": {"F": [[0.0, 0.0], [0.0, 0.0]]}},
                       ridge=0.0)
    assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 3


def test_unstable_system_guarded(tmp_path):
    cfg = write_config(tmp_path, system={"name": "linear", "params": {"J": [[1.0]], "half_width": 2.0}},
                       grid={"lo": [-1.5], "hi": [1.5], "per_dim": 41}, probe=[1.0])
    out = tmp_path / "out"
    code = main(["lyapunov", "--config", str(cfg), "--out", str(out)])
    if code == 0:
        assert float(read_summary(out / "summary.txt")["decay_fraction"]) < 0.5
    else:
        assert code == 4


def test_thread_env_validated(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)
    monkeypatch.setenv("KOOPMAN_LYAP_NUM_THREADS", "zero")
    assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 2
    monkeypatch.setenv("KOOPMAN_LYAP_NUM_THREADS", "1")
    assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0


def test_console_script_entry_point(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    proc = subprocess.run([sys.executable, "-m", "koopman_lyap.cli", "spectrum", "--config", str(cfg),
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "spectral_radius_exact=" in proc.stdout
