"""Experiment recipes behind the CLI modes.

Each ``run_*`` function takes a validated :class:`ExperimentConfig`, writes its
artifacts plus ``config_resolved.yaml`` into ``config.outputs`` and returns a
dict of summary values (also written to ``summary.txt``).
"""
from __future__ import annotations

import csv
import logging
import warnings
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .dynamics import SystemDef, fill_distance, get_system, grid_points, sample_trajectories, simulate
from .exceptions import ConfigError, DivergenceWarning, ParameterError
from .koopman import KoopmanEDMD
from .lyapunov import LyapunovEstimator, check_decay, norm_squared
from .oracle import exact_spectrum, linearized_lyapunov, simulate_lyapunov

logger = logging.getLogger(__name__)

__all__ = ["run_spectrum", "run_lyapunov", "run_trend", "run_predict", "run", "prepare_output_dir"]


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_summary(path: Path, summary: dict) -> None:
    Path(path).write_text("".join(f"{k}={_fmt(v)}\n" for k, v in summary.items()))


def read_summary(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        key, _, value = line.partition("=")
        out[key] = value
    return out


def prepare_output_dir(path) -> Path:
    out = Path(path)
    if out.exists() and (not out.is_dir() or any(out.iterdir())):
        raise ConfigError(f"output directory {out} exists and is not empty")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _system(config: ExperimentConfig) -> SystemDef:
    try:
        return get_system(config.system.name, **config.system.params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for system {config.system.name!r}: {exc}") from exc


def _lambdas(config):
    try:
        return np.asarray(config.krr_lambdas, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("krr_lambdas must be a number or a list of numbers") from None


def _grid(config, sys: SystemDef) -> np.ndarray:
    if len(config.grid.lo) != sys.dim:
        raise ConfigError(f"grid dimension {len(config.grid.lo)} does not match system dimension {sys.dim}")
    return grid_points(config.grid.lo, config.grid.hi, config.grid.per_dim)


def _probe(config, sys: SystemDef) -> np.ndarray:
    p = np.ones(sys.dim) if config.probe is None else np.asarray(config.probe, dtype=float)
    if p.shape != (sys.dim,):
        raise ConfigError("probe must be a single state of the system dimension")
    return p


def _estimator(config) -> LyapunovEstimator:
    return LyapunovEstimator(k=config.kernel.k, scale=config.kernel.scale, ridge=config.ridge,
                             lambdas=_lambdas(config), factors=config.decay)


def _sample(config, sys, n_traj=None):
    return sample_trajectories(sys, n_traj or config.n_traj, config.horizon, config.delta, config.seed)


def _oracle_values(config, sys, pts):
    # both oracles presume a stable origin; report them as missing otherwise
    if sys.contraction_rate(config.delta) >= 1:
        return np.full(len(pts), np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = simulate_lyapunov(sys, pts, norm_squared, config.delta,
                                tol=config.oracle.tol, t_max=config.oracle.t_max)
    return np.where(res.converged, res.value, np.nan)


def _finish(config, out: Path, summary: dict) -> dict:
    config.dump(out / "config_resolved.yaml")
    write_summary(out / "summary.txt", summary)
    return summary


def run_spectrum(config: ExperimentConfig) -> dict:
    sys = _system(config)
    out = prepare_output_dir(config.outputs)
    data = _sample(config, sys)
    model = KoopmanEDMD(k=config.kernel.k, scale=config.kernel.scale, ridge=config.ridge).fit(data.x, data.y)
    est = model.eigenvalues_
    write_csv(out / "spectrum_estimated.csv", ["re", "im", "modulus"],
              ([z.real, z.imag, abs(z)] for z in est))
    mu = np.linalg.eigvals(sys.discrete_jacobian(config.delta))
    truth = exact_spectrum(mu, config.oracle.degree_max)
    rows = [[z.real, z.imag, abs(z), int(dg)] for z, dg in zip(truth.products, truth.degrees)]
    rows.append([0.0, 0.0, 0.0, -1])
    write_csv(out / "spectrum_exact.csv", ["re", "im", "modulus", "degree"], rows)
    summary = {
        "n_pairs": data.n,
        "spectral_radius_estimated": model.spectral_radius_,
        "spectral_radius_exact": truth.spectral_radius,
        "leading_estimated_re": est[0].real,
        "leading_estimated_im": est[0].imag,
    }
    return _finish(config, out, summary)


def run_lyapunov(config: ExperimentConfig) -> dict:
    sys = _system(config)
    out = prepare_output_dir(config.outputs)
    data = _sample(config, sys)
    est = _estimator(config).fit(data.x, data.y)
    grid = _grid(config, sys)
    probe = _probe(config, sys)

    v_hat = est.predict(grid)
    v_oracle = _oracle_values(config, sys, grid)
    stable = sys.contraction_rate(config.delta) < 1
    P_lin = None
    if stable and not sys.is_discrete:
        P_lin = linearized_lyapunov(sys.jacobian_at_origin, config.delta)
    v_lin = np.einsum("ij,jk,ik->i", grid, P_lin, grid) if P_lin is not None else np.full(len(grid), np.nan)
    w = norm_squared(grid)
    slack = config.slack_fraction * float(w.max())
    report = check_decay(est.model_, est.decay_, sys, grid, slack, config.delta)

    header = [f"x{i + 1}" for i in range(sys.dim)] + ["v_hat", "v_oracle", "v_lin", "decay_violation"]
    write_csv(out / "lyapunov_grid.csv", header,
              (list(p) + [a, b, c, dlt] for p, a, b, c, dlt in zip(grid, v_hat, v_oracle, v_lin, report.delta)))
    summary = {
        "n_pairs": data.n,
        "v_hat_probe": float(est.predict(probe[None, :])[0]),
        "v_oracle_probe": float(_oracle_values(config, sys, probe[None, :])[0]),
        "v_lin_probe": float(probe @ P_lin @ probe) if P_lin is not None else float("nan"),
        "decay_fraction": report.fraction,
        "decay_slack": slack,
        "decay_worst_violation": report.worst_violation,
        "h_fill": fill_distance(data.x, sys.domain, config.fill_grid_per_dim),
        "stein_residual": est.model_.solver_residual,
        "stein_residual_relative": est.model_.solver_residual / max(np.linalg.norm(est.decay_.H_), 1e-300),
        "spectral_radius_estimated": est.koopman_.spectral_radius_,
    }
    if P_lin is not None:
        summary.update(P_lin_11=P_lin[0, 0], P_lin_12=P_lin[0, 1], P_lin_22=P_lin[-1, -1])
    return _finish(config, out, summary)


def run_trend(config: ExperimentConfig) -> dict:
    sizes = list(config.trend.sample_sizes)
    if len(sizes) < 3:
        raise ConfigError("trend mode needs at least 3 sample sizes")
    sys = _system(config)
    out = prepare_output_dir(config.outputs)
    full = _sample(config, sys, max(sizes))
    grid = _grid(config, sys)
    v_oracle = _oracle_values(config, sys, grid)
    ok = np.isfinite(v_oracle)
    rows = []
    for n_traj in sizes:
        data = full.subset(n_traj)
        est = _estimator(config).fit(data.x, data.y)
        err = est.predict(grid[ok]) - v_oracle[ok]
        rows.append([n_traj, data.n, fill_distance(data.x, sys.domain, config.fill_grid_per_dim),
                     float(np.sqrt(np.mean(err ** 2))) if err.size else float("nan"),
                     float(np.median(est.koopman_.feature_residual())),
                     est.koopman_.spectral_radius_])
        logger.info("trend n_traj=%d h_fill=%.4g rms=%.4g", n_traj, rows[-1][2], rows[-1][3])
    write_csv(out / "trend.csv",
              ["n_traj", "n_pairs", "h_fill", "lyapunov_rms_error", "feature_residual_median",
               "spectral_radius"], rows)
    h = [r[2] for r in rows]
    summary = {
        "h_fill_strictly_decreasing": all(a > b for a, b in zip(h, h[1:])),
        "rms_error_improves": rows[-1][3] < rows[0][3],
        "rms_error_smallest_n": rows[0][3],
        "rms_error_largest_n": rows[-1][3],
        "oracle_points_used": int(ok.sum()),
    }
    return _finish(config, out, summary)


def run_predict(config: ExperimentConfig) -> dict:
    sys = _system(config)
    out = prepare_output_dir(config.outputs)
    data = _sample(config, sys)
    model = KoopmanEDMD(k=config.kernel.k, scale=config.kernel.scale, ridge=config.ridge).fit(data.x, data.y)
    steps = config.predict.steps
    summary = {"n_pairs": data.n}
    for i, x0 in enumerate(config.predict.initial_states):
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (sys.dim,):
            raise ConfigError(f"initial state {i} does not match the system dimension")
        true = simulate(sys, x0, config.delta, steps)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DivergenceWarning)
            pred = model.predict_trajectory(x0, steps)
        diverged = any(issubclass(c.category, DivergenceWarning) for c in caught)
        rows, devs = [], []
        for t in range(steps + 1):
            if t < len(pred):
                dev = float(np.linalg.norm(pred[t] - true[t]))
                devs.append(dev)
                rows.append([t, *true[t], *pred[t], dev, "ok"])
            else:
                rows.append([t, *true[t], *([float("nan")] * sys.dim), float("nan"), "diverged"])
        header = (["t"] + [f"x_true_{j + 1}" for j in range(sys.dim)]
                  + [f"x_pred_{j + 1}" for j in range(sys.dim)] + ["deviation", "status"])
        write_csv(out / f"predict_{i}.csv", header, rows)
        summary[f"mean_deviation_{i}"] = float(np.mean(devs[1:])) if len(devs) > 1 else 0.0
        summary[f"diverged_{i}"] = diverged
    return _finish(config, out, summary)


RUNNERS = {
    "spectrum": run_spectrum,
    "lyapunov": run_lyapunov,
    "trend": run_trend,
    "predict": run_predict,
}


def run(config: ExperimentConfig) -> dict:
    config.validate()
    try:
        return RUNNERS[config.mode](config)
    except ParameterError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
