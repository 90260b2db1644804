"""Independent ground truth for the estimators.

None of these routines touch the kernel machinery: the exact Koopman spectrum
comes from Jacobian eigenvalues, Lyapunov values from forward simulation, the
linearized quadratic form from a Kronecker-vectorized Stein solve, and the
series Stein solution from direct summation.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import expm

from ._validation import check_square
from .dynamics import SystemDef, step
from .exceptions import ConvergenceWarning, InstabilityError, ParameterError

__all__ = [
    "SpectrumTruth",
    "exact_spectrum",
    "SimulationResult",
    "simulate_lyapunov",
    "linearized_lyapunov",
    "series_stein",
]


@dataclass(frozen=True)
class SpectrumTruth:
    """Products of Jacobian eigenvalues up to a total degree, plus the point 0."""

    generators: np.ndarray
    products: np.ndarray
    degrees: np.ndarray
    includes_zero: bool = True

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.generators)))

    def points(self) -> np.ndarray:
        """All listed spectrum points, 0 last when present."""
        if self.includes_zero:
            return np.concatenate([self.products, [0.0 + 0.0j]])
        return self.products.copy()


def exact_spectrum(mu, degree_max: int = 8, dedup_tol: float = 1e-12) -> SpectrumTruth:
    """Enumerate ``prod_i mu_i^{p_i}`` for ``1 <= sum p_i <= degree_max``.

    The empty product 1 is excluded; 0 is the accumulation point.  Entries are
    sorted by descending modulus, conjugates with positive imaginary part first.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=complex))
    if mu.size == 0:
        raise ParameterError("at least one generator is required")
    if np.any(np.abs(mu) >= 1):
        raise ParameterError("all generators must lie strictly inside the unit disk")
    if int(degree_max) != degree_max or degree_max < 1:
        raise ParameterError("degree_max must be a positive integer")
    vals, degs = [], []
    for exps in itertools.product(range(int(degree_max) + 1), repeat=mu.size):
        total = sum(exps)
        if 1 <= total <= degree_max:
            vals.append(np.prod(mu ** np.array(exps)))
            degs.append(total)
    vals = np.array(vals)
    degs = np.array(degs)
    order = np.lexsort((degs, -vals.imag, -np.abs(vals)))
    kept_v, kept_d = [], []
    for v, dg in zip(vals[order], degs[order]):
        if not any(abs(v - u) <= dedup_tol for u in kept_v):
            kept_v.append(v)
            kept_d.append(dg)
    return SpectrumTruth(mu, np.array(kept_v), np.array(kept_d), True)


class SimulationResult(NamedTuple):
    value: np.ndarray | float
    converged: np.ndarray | bool
    steps: np.ndarray | int


def simulate_lyapunov(sys: SystemDef, x, w: Callable[[np.ndarray], np.ndarray], delta: float,
                      tol: float = 1e-8, t_max: int = 10_000) -> SimulationResult:
    """Accumulate ``sum_t w(f^t(x))`` until the estimated tail drops below ``tol``.

    The tail after step ``T`` is bounded by ``2 w(x_T) / (1 - r^2)`` with ``r``
    the largest modulus of the linearized map's eigenvalues.  Accepts one state
    ``(d,)`` or a batch ``(n, d)``; trajectories still running at ``t_max`` are
    reported as unconverged and a :class:`ConvergenceWarning` is issued.
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != sys.dim:
        raise ParameterError(f"state dimension {X.shape[1]} does not match system {sys.dim}")
    r = sys.contraction_rate(delta)
    if r >= 1:
        raise InstabilityError("linearization at the origin is not stable; the series diverges")
    tail_factor = 2.0 / (1.0 - r * r)

    total = np.zeros(len(X))
    steps = np.zeros(len(X), dtype=int)
    active = np.ones(len(X), dtype=bool)
    cur = X.copy()
    for _ in range(int(t_max)):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        wv = np.asarray(w(cur[idx]), dtype=float)
        total[idx] += wv
        steps[idx] += 1
        nxt = step(sys, cur[idx], delta)
        cur[idx] = nxt
        tail = tail_factor * np.asarray(w(nxt), dtype=float)
        done = tail < tol
        # the tail bound is only trustworthy near the origin
        done &= np.linalg.norm(nxt, axis=1) < 1.0
        active[idx[done]] = False
    converged = ~active
    if not converged.all():
        warnings.warn(f"{int(active.sum())} trajectories did not converge within {t_max} steps",
                      ConvergenceWarning, stacklevel=2)
    if single:
        return SimulationResult(float(total[0]), bool(converged[0]), int(steps[0]))
    return SimulationResult(total, converged, steps)


def _kron_stein(F: np.ndarray, W: np.ndarray) -> np.ndarray:
    # vec(F^T P F) = (F^T kron F^T) vec(P) for column-major vec
    d = F.shape[0]
    A = np.kron(F.T, F.T) - np.eye(d * d)
    p = np.linalg.solve(A, -W.reshape(-1, order="F"))
    P = p.reshape(d, d, order="F")
    return 0.5 * (P + P.T)


def linearized_lyapunov(J, delta: float, W=None) -> np.ndarray:
    """Quadratic Lyapunov matrix of the sampled linearization.

    Solves ``F^T P F - P = -W`` with ``F = expm(delta * J)``, i.e. ``w`` is
    accumulated once per sampling step with no ``delta`` weighting.
    """
    J = check_square(J, "J")
    W = np.eye(J.shape[0]) if W is None else check_square(W, "W")
    F = expm(delta * J)
    if np.max(np.abs(np.linalg.eigvals(F))) >= 1:
        raise InstabilityError("sampled linearization is not Schur stable")
    return _kron_stein(F, W)


def series_stein(M, H, tol: float = 1e-14, max_terms: int = 1_000_000) -> np.ndarray:
    """``sum_t (M^T)^t H M^t`` truncated once a term's Frobenius norm is below ``tol``."""
    M = check_square(M, "M")
    H = check_square(H, "H")
    total = np.zeros_like(H)
    term = H.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(int(max_terms)):
            total += term
            if np.linalg.norm(term) < tol:
                return 0.5 * (total + total.T)
            term = M.T @ term @ M
            if not np.all(np.isfinite(term)):
                break
    raise InstabilityError("Stein series did not converge")
