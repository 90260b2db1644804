"""End-to-end acceptance checks.

Each test prints a single ``CRITERION <n> PASS|FAIL`` line (visible even
without ``-s``) and then asserts the same condition.
"""
import time
from math import floor

import numpy as np
import pytest
from scipy.integrate import quad

from koopman_lyap import (InstabilityError, KoopmanEDMD, LyapunovEstimator, brusselator, build_wendland,
                          check_decay, gram, lienard, linear_system, linearized_lyapunov, make_kernel,
                          sample_trajectories, series_stein, simulate_lyapunov, solve_stein)
from koopman_lyap.config import ExperimentConfig
from koopman_lyap.dynamics import grid_points
from koopman_lyap.experiments import run_trend
from koopman_lyap.lyapunov import norm_squared, stein_residual

DELTA = 0.2
PROBE = np.array([1.0, 1.0])


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


def test_criterion_1_brusselator_spectrum(report):
    start = time.perf_counter()
    data = sample_trajectories(brusselator(), 50, 5.0, DELTA, seed=0)
    ev = KoopmanEDMD().fit(data.x, data.y).eigenvalues_
    elapsed = time.perf_counter() - start
    target = np.exp(-0.1 + 0.1j * np.sqrt(3))
    bound = np.exp(-0.1) + 0.05
    pair_err = max(abs(ev[0] - target), abs(ev[1] - np.conj(target)))
    if ev[0].imag < 0:
        pair_err = max(abs(ev[0] - np.conj(target)), abs(ev[1] - target))
    ok = np.max(np.abs(ev)) <= bound and pair_err < 0.05 and elapsed < 120
    report(1, ok, f"max|lambda|={np.max(np.abs(ev)):.4f} (<= {bound:.4f}), "
                  f"leading pair error={pair_err:.4f} (< 0.05), runtime={elapsed:.1f}s (< 120s)")
    assert ok


def test_criterion_2_lienard_lyapunov_value(report):
    start = time.perf_counter()
    data = sample_trajectories(lienard(), 50, 5.0, DELTA, seed=0)
    est = LyapunovEstimator().fit(data.x, data.y)
    v_hat = float(est.predict(PROBE[None, :])[0])
    sim = simulate_lyapunov(lienard(), PROBE, norm_squared, DELTA)
    P_lin = linearized_lyapunov(lienard().jacobian_at_origin, DELTA)
    v_lin = float(PROBE @ P_lin @ PROBE)
    elapsed = time.perf_counter() - start
    checks = {
        "v_hat": 30 <= v_hat <= 50,
        "v_oracle": sim.converged and 35 <= sim.value <= 45,
        "v_lin": 18 <= v_lin <= 20,
        "runtime": elapsed < 600,
    }
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    report(2, ok, f"v_hat(1,1)={v_hat:.3f} in [30,50]; v_oracle(1,1)={sim.value:.3f} in [35,45]; "
                  f"v_lin(1,1)={v_lin:.3f} in [18,20]; runtime={elapsed:.1f}s"
                  + (f"; failing: {', '.join(failed)}" if failed else ""))
    assert ok


def test_criterion_3_linearized_coefficients(report):
    P = linearized_lyapunov([[0.0, 1.0], [-1.0, -1.0]], DELTA)
    coeffs = np.array([P[0, 0], 2 * P[0, 1], P[1, 1]])
    rel = np.abs(coeffs / np.array([8.0, 5.0, 5.533]) - 1)
    ok = bool(np.all(rel < 0.01))
    report(3, ok, f"coefficients={np.round(coeffs, 4).tolist()}, max relative deviation={rel.max():.2e} (< 1%)")
    assert ok


def test_criterion_4_decay_inequality(report, lienard_fit):
    grid = grid_points([-1.5, -1.5], [1.5, 1.5], 41)
    slack = 0.05 * float(norm_squared(grid).max())
    rep = check_decay(lienard_fit.model_, lienard_fit.decay_, lienard(), grid, slack, DELTA)
    ok = rep.fraction >= 0.9
    report(4, ok, f"fraction={rep.fraction:.4f} (>= 0.9) with slack={slack:.3f}, "
                  f"worst violation={rep.worst_violation:.3f}")
    assert ok


def test_criterion_5_stein_solver(report):
    rng = np.random.default_rng(2024)
    worst_diff, worst_res = 0.0, 0.0
    for _ in range(100):
        n = int(rng.integers(1, 51))
        radius = float(rng.uniform(0.1, 0.95))
        M = rng.standard_normal((n, n))
        M *= radius / np.max(np.abs(np.linalg.eigvals(M)))
        B = rng.standard_normal((n, n))
        H = B @ B.T
        Pi = solve_stein(M, H)
        worst_diff = max(worst_diff, float(np.linalg.norm(Pi - series_stein(M, H))))
        worst_res = max(worst_res, stein_residual(M, H, Pi) / np.linalg.norm(H))
    ok = worst_diff < 1e-8 and worst_res <= 1e-6
    report(5, ok, f"max |Pi_schur - Pi_series|_F={worst_diff:.2e} (< 1e-8), "
                  f"max relative residual={worst_res:.2e} (<= 1e-6) over 100 instances")
    assert ok


def _quad_profile(d, k, r):
    ell = floor(d / 2 + k + 1)
    if k == 0:
        return (1 - r) ** ell
    c = 2.0 ** (k - 1) * np.prod(np.arange(1, k))
    return quad(lambda s: (1 - s) ** ell * s * (s * s - r * r) ** (k - 1) / c, r, 1,
                epsabs=1e-14, epsrel=1e-13)[0]


def test_criterion_6_kernel_validity(report):
    rng = np.random.default_rng(12345)
    worst_psd = np.inf
    for _ in range(100):
        d = int(rng.integers(1, 4))
        k = int(rng.integers(0, 3))
        n = int(rng.integers(1, 51))
        pts = rng.uniform(-2, 2, (n, d))
        ev_min = np.linalg.eigvalsh(gram(make_kernel(d, k, float(rng.uniform(0.5, 4.0))), pts, pts)).min()
        worst_psd = min(worst_psd, ev_min / (1e-10 * n))
    r = np.linspace(0, 1, 100)
    worst_quad = max(np.max(np.abs(build_wendland(d, k)(r) - [_quad_profile(d, k, ri) for ri in r]))
                     for d in (1, 2, 3) for k in (0, 1, 2, 3))
    ok = worst_psd >= -1 and worst_quad < 1e-10
    report(6, ok, f"min eigenvalue / (1e-10 n)={worst_psd:.3g} (>= -1), "
                  f"max |rho - quadrature|={worst_quad:.2e} (< 1e-10)")
    assert ok


def test_criterion_7_error_trend(report, tmp_path):
    cfg = ExperimentConfig.from_dict({"mode": "trend", "outputs": str(tmp_path / "trend"),
                                      "trend": {"sample_sizes": [10, 30, 50]}}).validate()
    summary = run_trend(cfg)
    rows = np.genfromtxt(tmp_path / "trend" / "trend.csv", delimiter=",", names=True)
    h = rows["h_fill"]
    err = rows["lyapunov_rms_error"]
    ok = bool(np.all(np.diff(h) < 0) and err[-1] < err[0])
    assert summary["h_fill_strictly_decreasing"] == bool(np.all(np.diff(h) < 0))
    report(7, ok, f"h_fill={np.round(h, 4).tolist()} strictly decreasing; "
                  f"RMS error={np.round(err, 4).tolist()} (last < first)")
    assert ok


def test_criterion_8_instability_guard(report):
    sys = linear_system([[1.0]])
    data = sample_trajectories(sys, 50, 5.0, DELTA, seed=0)
    try:
        est = LyapunovEstimator().fit(data.x, data.y)
    except InstabilityError as exc:
        radius = KoopmanEDMD().fit(data.x, data.y).spectral_radius_
        ok = radius >= 1 - 1e-6 and "not inside unit disk" in str(exc)
        report(8, ok, f"instability error raised, estimated spectral radius={radius:.6f}")
        assert ok
        return
    grid = grid_points([-1.5], [1.5], 41)
    slack = 0.05 * float(norm_squared(grid).max())
    rep = check_decay(est.model_, est.decay_, sys, grid, slack, DELTA)
    ok = rep.fraction < 0.5
    report(8, ok, f"estimated spectral radius={est.koopman_.spectral_radius_:.6f} inside the disk; "
                  f"decay fraction={rep.fraction:.4f} (< 0.5)")
    assert ok
