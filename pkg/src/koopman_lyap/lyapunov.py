"""Decay-rate regression, the discrete Stein equation and the Lyapunov estimate.

The decay rate ``w = sum_i omega_i^2`` is represented by KRR fits
``omega_i ~ sum_j alpha_ij kappa(x_j, .)``, giving the coefficient matrix
``H = alpha^T alpha``.  The Lyapunov coefficients ``Pi`` solve
``M^T Pi M - Pi = -H`` with ``M = Gamma @ Theta`` from kernel EDMD, and the
estimate is ``v(x) = k_x^T Pi k_x``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, schur, solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_square
from .dynamics import SystemDef, step
from .exceptions import IllConditionedError, InstabilityError, ParameterError
from .kernels import ProductKernel, make_kernel
from .koopman import KoopmanEDMD

__all__ = [
    "DecayKRR",
    "LyapunovModel",
    "LyapunovEstimator",
    "DecayReport",
    "coordinate_factors",
    "norm_squared",
    "fit_decay",
    "solve_stein",
    "stein_residual",
    "estimate_lyapunov",
    "eval_lyapunov",
    "check_decay",
]

STABILITY_MARGIN = 1e-6


def coordinate_factors(d: int) -> list[Callable[[np.ndarray], np.ndarray]]:
    """Coordinate functions ``e_1, ..., e_d``: the factors of ``w(x) = |x|^2``."""
    return [(lambda X, i=i: X[:, i]) for i in range(d)]


def norm_squared(X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.einsum("ij,ij->i", X, X)


class DecayKRR(RegressorMixin, BaseEstimator):
    """Kernel ridge regression of the sum-of-squares factors of a decay rate.

    Parameters
    ----------
    k, scale : kernel hyperparameters, see :class:`KoopmanEDMD`.
    lambdas : float or sequence of float, default=1e-6
        Per-factor regularization; each factor solves
        ``(G_xx + n * lambda_i * I) alpha_i = t_i``.
    factors : "norm_squared" or sequence of callables, default="norm_squared"
        Used to build targets when :meth:`fit` is called without ``T`` and to
        evaluate the analytic decay rate in :meth:`true_decay`.

    Attributes
    ----------
    centers_ : ndarray of shape (n, d)
    alpha_ : ndarray of shape (N, n)
    H_ : ndarray of shape (n, n)
        ``alpha_.T @ alpha_``.
    lambdas_ : ndarray of shape (N,)
    n_factors_ : int
    """

    def __init__(self, k=1, scale=2.0, lambdas=1e-6, factors="norm_squared"):
        self.k = k
        self.scale = scale
        self.lambdas = lambdas
        self.factors = factors

    def _factor_funcs(self, d):
        if isinstance(self.factors, str):
            if self.factors != "norm_squared":
                raise ParameterError(f"unknown decay {self.factors!r}")
            return coordinate_factors(d)
        funcs = list(self.factors)
        if not funcs or not all(callable(f) for f in funcs):
            raise ParameterError("factors must be a non-empty sequence of callables")
        return funcs

    def fit(self, X, T=None):
        X = check_points(X)
        n, d = X.shape
        if T is None:
            T = np.column_stack([np.asarray(f(X), dtype=float).reshape(n) for f in self._factor_funcs(d)])
        T = np.asarray(T, dtype=float)
        if T.ndim == 1:
            T = T[:, None]
        if T.shape[0] != n or not np.all(np.isfinite(T)):
            raise ParameterError("targets must be finite with one row per sample")
        N = T.shape[1]
        lambdas = np.broadcast_to(np.asarray(self.lambdas, dtype=float), (N,)).copy()
        if np.any(~np.isfinite(lambdas)) or np.any(lambdas <= 0):
            raise ParameterError("KRR regularization constants must be positive")

        self.kernel_ = make_kernel(d, self.k, self.scale)
        self.n_features_in_ = d
        self.centers_ = X
        G = self.kernel_.gram(X, X)
        alpha = np.empty((N, n))
        for lam in np.unique(lambdas):
            cols = np.flatnonzero(lambdas == lam)
            try:
                factor = cho_factor(G + n * lam * np.eye(n), lower=True)
            except LinAlgError as exc:
                raise IllConditionedError("KRR system is not positive definite") from exc
            alpha[cols] = cho_solve(factor, T[:, cols]).T
        self.alpha_ = alpha
        self.H_ = alpha.T @ alpha
        self.lambdas_ = lambdas
        self.n_factors_ = N
        return self

    def predict(self, X):
        """Fitted factor values, shape ``(n_samples, N)``."""
        check_is_fitted(self, "alpha_")
        X = check_points(X, self.n_features_in_)
        return self.kernel_.gram(X, self.centers_) @ self.alpha_.T

    def decay(self, X) -> np.ndarray:
        """Estimated decay rate ``sum_i omega_i(x)^2``."""
        return np.sum(self.predict(X) ** 2, axis=1)

    def true_decay(self, X) -> np.ndarray:
        """Analytic decay rate from the configured factors."""
        check_is_fitted(self, "alpha_")
        X = check_points(X, self.n_features_in_)
        return np.sum([np.asarray(f(X), dtype=float) ** 2 for f in self._factor_funcs(X.shape[1])], axis=0)


def fit_decay(kern: ProductKernel, data, factors: Sequence[Callable] | str = "norm_squared",
              lambdas=1e-6) -> DecayKRR:
    if data.dim != kern.d:
        raise ParameterError(f"data dimension {data.dim} does not match kernel dimension {kern.d}")
    return DecayKRR(k=kern.radial.k, scale=kern.radial.scale, lambdas=lambdas,
                    factors=factors).fit(data.x)


def stein_residual(M, H, Pi) -> float:
    """Frobenius norm of ``M^T Pi M - Pi + H``."""
    return float(np.linalg.norm(M.T @ Pi @ M - Pi + H))


def solve_stein(M, H, margin: float = STABILITY_MARGIN) -> np.ndarray:
    """Solve ``M^T Pi M - Pi = -H`` by complex Schur back-substitution.

    With ``M = U T U^H`` (``T`` upper triangular) the unknown ``Y = U^H Pi U``
    satisfies ``T^H Y T - Y = -U^H H U``.  Column ``j`` of ``Y`` solves the
    lower-triangular system ``(T_jj T^H - I) y_j = -c_j - T^H Y[:, :j] T[:j, j]``.

    Raises
    ------
    InstabilityError
        If the spectral radius of ``M`` is not below ``1 - margin``.
    """
    M = check_square(M, "M")
    H = check_square(H, "H")
    if M.shape != H.shape:
        raise ParameterError(f"M {M.shape} and H {H.shape} must have the same shape")
    n = M.shape[0]
    T, U = schur(M, output="complex")
    diag = np.diag(T)
    radius = float(np.max(np.abs(diag)))
    if radius >= 1.0 - margin:
        raise InstabilityError(
            f"estimated Koopman spectral radius {radius:.6g} not inside unit disk; "
            "Lyapunov equation has no convergent solution")
    C = U.conj().T @ H @ U
    TH = T.conj().T
    Y = np.zeros((n, n), dtype=complex)
    eye = np.eye(n)
    for j in range(n):
        rhs = -C[:, j]
        if j:
            rhs = rhs - TH @ (Y[:, :j] @ T[:j, j])
        Y[:, j] = solve_triangular(T[j, j] * TH - eye, rhs, lower=True, check_finite=False)
    Pi = (U @ Y @ U.conj().T).real
    return 0.5 * (Pi + Pi.T)


@dataclass(frozen=True)
class LyapunovModel:
    """Kernel quadratic form ``v(x) = k_x^T Pi k_x`` anchored at ``centers``."""

    centers: np.ndarray
    Pi: np.ndarray
    kern: ProductKernel
    solver_residual: float

    def __call__(self, X) -> np.ndarray:
        X = check_points(X, self.kern.d)
        Kx = self.kern.gram(self.centers, X)
        return np.einsum("ij,ik,kj->j", Kx, self.Pi, Kx)


def estimate_lyapunov(koop: KoopmanEDMD, decay: DecayKRR, margin: float = STABILITY_MARGIN) -> LyapunovModel:
    check_is_fitted(koop, "Theta_")
    check_is_fitted(decay, "H_")
    if koop.kernel_ != decay.kernel_:
        raise ParameterError("Koopman and decay models use different kernels")
    if koop.X_fit_.shape != decay.centers_.shape or not np.array_equal(koop.X_fit_, decay.centers_):
        raise ParameterError("Koopman and decay models are anchored at different centers")
    M = koop.koopman_matrix_
    Pi = solve_stein(M, decay.H_, margin=margin)
    return LyapunovModel(koop.X_fit_, Pi, koop.kernel_, stein_residual(M, decay.H_, Pi))


def eval_lyapunov(model: LyapunovModel, x) -> float | np.ndarray:
    """``v(x)`` for one state (returns float) or a batch ``(n, d)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(model(x[None, :])[0])
    return model(x)


@dataclass(frozen=True)
class DecayReport:
    """Pointwise ``delta(x) = v(f(x)) - v(x) + w(x)`` over a grid."""

    points: np.ndarray
    delta: np.ndarray
    slack: float

    @property
    def satisfied(self) -> np.ndarray:
        return self.delta <= self.slack

    @property
    def fraction(self) -> float:
        return float(np.mean(self.satisfied))

    @property
    def worst_violation(self) -> float:
        return float(np.max(self.delta))


def check_decay(model, decay, sys: SystemDef, grid, slack: float, delta: float = 0.2) -> DecayReport:
    """Check the decay inequality on ``grid`` with the true map and analytic ``w``.

    ``model`` is any callable ``v(X)``; ``decay`` is a fitted :class:`DecayKRR`
    (its analytic factors are used) or a callable ``w(X)``.
    """
    grid = check_points(grid, sys.dim, name="grid")
    w = decay.true_decay(grid) if isinstance(decay, DecayKRR) else np.asarray(decay(grid), dtype=float)
    d = model(step(sys, grid, delta)) - model(grid) + w
    return DecayReport(grid, d, float(slack))


class LyapunovEstimator(RegressorMixin, BaseEstimator):
    """End-to-end estimator: kernel EDMD + decay KRR + Stein solve.

    ``fit(X, Y)`` takes snapshot pairs; ``predict(X)`` returns the Lyapunov
    estimate ``v(X)``.  ``score`` is the R^2 of ``v`` against a reference, which
    is only meaningful when a reference Lyapunov function is available.
    """

    def __init__(self, k=1, scale=2.0, ridge=1e-8, lambdas=1e-6, factors="norm_squared",
                 margin=STABILITY_MARGIN):
        self.k = k
        self.scale = scale
        self.ridge = ridge
        self.lambdas = lambdas
        self.factors = factors
        self.margin = margin

    def fit(self, X, Y):
        self.koopman_ = KoopmanEDMD(k=self.k, scale=self.scale, ridge=self.ridge).fit(X, Y)
        self.decay_ = DecayKRR(k=self.k, scale=self.scale, lambdas=self.lambdas,
                               factors=self.factors).fit(self.koopman_.X_fit_)
        self.model_ = estimate_lyapunov(self.koopman_, self.decay_, margin=self.margin)
        self.n_features_in_ = self.koopman_.n_features_in_
        return self

    @property
    def Pi_(self) -> np.ndarray:
        check_is_fitted(self, "model_")
        return self.model_.Pi

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.model_(X)
