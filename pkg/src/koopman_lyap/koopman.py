"""Kernel EDMD estimate of the Koopman operator on the product-kernel RKHS.

The fitted adjoint is ``A* = sum_ij Theta_ij kappa(y_i, .) x kappa(x_j, .)``
with ``Theta = (G_xx + n * ridge * I)^{-1}``.  On the span of the canonical
features of the x-samples, ``A`` acts through the coefficient matrix
``M = Gamma @ Theta`` where ``Gamma_ij = kappa(x_i, y_j)``.
"""
from __future__ import annotations

import warnings

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigvals
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_positive, check_state
from .exceptions import DivergenceWarning, IllConditionedError, ParameterError
from .kernels import ProductKernel, make_kernel

__all__ = ["KoopmanEDMD", "fit_kedmd", "spectrum", "predict_trajectory", "regularized_inverse"]

RESIDUAL_TOL = 1e-8


def regularized_inverse(G: np.ndarray, shift: float) -> np.ndarray:
    """``(G + shift * I)^{-1}`` through a Cholesky factorization.

    Raises
    ------
    IllConditionedError
        If the shifted matrix is not numerically positive definite or the
        computed inverse misses the identity by more than ``1e-8`` (relative).
    """
    n = G.shape[0]
    A = G + shift * np.eye(n)
    hint = "set ridge > 0" if shift == 0 else "increase ridge"
    try:
        factor = cho_factor(A, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise IllConditionedError(f"Gram matrix is singular to working precision; {hint}") from exc
    inv = cho_solve(factor, np.eye(n), check_finite=False)
    resid = np.linalg.norm(A @ inv - np.eye(n)) / np.sqrt(n)
    if not np.isfinite(resid) or resid > RESIDUAL_TOL:
        raise IllConditionedError(
            f"Gram matrix is numerically rank deficient (residual {resid:.2e}); {hint}")
    return 0.5 * (inv + inv.T)


class KoopmanEDMD(RegressorMixin, BaseEstimator):
    """Koopman operator learned by kernel EDMD with the linear-Wendland kernel.

    Parameters
    ----------
    k : int, default=1
        Wendland smoothness index.
    scale : float, default=2.0
        Support radius of the radial factor.
    ridge : float, default=1e-8
        Tikhonov constant; the Gram system solved is ``G_xx + n * ridge * I``.
        ``0`` reproduces the unregularized ``Theta = G_xx^{-1}``.

    Attributes
    ----------
    kernel_ : ProductKernel
    X_fit_, Y_fit_ : ndarray of shape (n, d)
    G_xx_ : ndarray of shape (n, n)
    Gamma_ : ndarray of shape (n, n)
        Cross-Gram, ``Gamma_[i, j] = kappa(x_i, y_j)``.
    Theta_ : ndarray of shape (n, n)
    eigenvalues_ : ndarray of complex
        Eigenvalues of ``Gamma_ @ Theta_`` by descending modulus.
    spectral_radius_ : float
    """

    def __init__(self, k=1, scale=2.0, ridge=1e-8):
        self.k = k
        self.scale = scale
        self.ridge = ridge

    def fit(self, X, Y):
        """Fit from snapshot pairs ``Y[j] = f(X[j])``."""
        X = check_points(X)
        Y = check_points(Y, X.shape[1], name="Y")
        if X.shape != Y.shape:
            raise ParameterError("X and Y must contain the same number of states")
        ridge = check_positive(self.ridge, "ridge", allow_zero=True)
        n, d = X.shape
        self.kernel_ = make_kernel(d, self.k, self.scale)
        self.n_features_in_ = d
        self.X_fit_ = X
        self.Y_fit_ = Y
        self.G_xx_ = self.kernel_.gram(X, X)
        self.Gamma_ = self.kernel_.gram(X, Y)
        self.Theta_ = regularized_inverse(self.G_xx_, n * ridge)
        self.eigenvalues_ = _sorted_eigenvalues(self.koopman_matrix_)
        self.spectral_radius_ = float(np.abs(self.eigenvalues_[0]))
        return self

    @property
    def koopman_matrix_(self) -> np.ndarray:
        """``M = Gamma @ Theta``; coefficient action of the operator on ``span kappa(x_j, .)``."""
        check_is_fitted(self, "Theta_")
        return self.Gamma_ @ self.Theta_

    def _kx(self, X):
        return self.kernel_.gram(self.X_fit_, X)

    def predict(self, X):
        """One-step state prediction ``Y^T Theta k_x`` (coordinate functions decoded)."""
        check_is_fitted(self, "Theta_")
        X = check_points(X, self.n_features_in_)
        return (self.Theta_ @ self._kx(X)).T @ self.Y_fit_

    def feature_residual(self, X=None, Y=None) -> np.ndarray:
        """RKHS norm ``|A* kappa(x, .) - kappa(y, .)|`` for each pair (training pairs by default)."""
        check_is_fitted(self, "Theta_")
        if X is None:
            X, Y = self.X_fit_, self.Y_fit_
            C = self.Theta_ @ self.G_xx_
        else:
            X = check_points(X, self.n_features_in_)
            Y = check_points(Y, self.n_features_in_, name="Y")
            C = self.Theta_ @ self._kx(X)
        G_yy = self.kernel_.gram(self.Y_fit_, self.Y_fit_)
        cross = self.kernel_.gram(self.Y_fit_, Y)
        sq = (self.kernel_.diag(Y) - 2.0 * np.einsum("ij,ij->j", C, cross)
              + np.einsum("ij,ij->j", C, G_yy @ C))
        return np.sqrt(np.maximum(sq, 0.0))

    def predict_trajectory(self, x0, steps: int, bounds=None) -> np.ndarray:
        """Iterate decode/re-encode from ``x0`` for ``steps`` steps.

        Returns an array of shape ``(m + 1, d)`` with ``m <= steps``.  If a
        decoded state leaves ``bounds`` (default: training bounding box
        inflated by its own extent on each side) a ``DivergenceWarning`` is
        issued and the trajectory is truncated before that state.
        """
        check_is_fitted(self, "Theta_")
        if int(steps) != steps or steps < 0:
            raise ParameterError("steps must be a non-negative integer")
        x = check_state(x0, self.n_features_in_, name="x0")
        if bounds is None:
            lo = self.X_fit_.min(axis=0)
            hi = self.X_fit_.max(axis=0)
            ext = hi - lo
            bounds = (lo - ext, hi + ext)
        lo, hi = (np.asarray(b, dtype=float) for b in bounds)
        out = [x]
        for t in range(int(steps)):
            x = self.predict(x[None, :])[0]
            if not (np.all(np.isfinite(x)) and np.all(x >= lo) and np.all(x <= hi)):
                warnings.warn(f"predicted state left the admissible box at step {t + 1}; "
                              "trajectory truncated", DivergenceWarning, stacklevel=2)
                break
            out.append(x)
        return np.array(out)


def _sorted_eigenvalues(M: np.ndarray) -> np.ndarray:
    try:
        w = eigvals(M, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise IllConditionedError(f"eigensolver failed: {exc}") from exc
    # descending modulus, positive imaginary part first within a conjugate pair
    order = np.lexsort((-w.imag, -np.abs(w)))
    return w[order]


def fit_kedmd(kern: ProductKernel, data, ridge: float = 1e-8) -> KoopmanEDMD:
    """Fit :class:`KoopmanEDMD` with the hyperparameters of ``kern`` on a SampleSet."""
    if data.dim != kern.d:
        raise ParameterError(f"data dimension {data.dim} does not match kernel dimension {kern.d}")
    return KoopmanEDMD(k=kern.radial.k, scale=kern.radial.scale, ridge=ridge).fit(data.x, data.y)


def spectrum(model: KoopmanEDMD) -> np.ndarray:
    check_is_fitted(model, "Theta_")
    return model.eigenvalues_.copy()


def predict_trajectory(model: KoopmanEDMD, x0, steps: int, bounds=None) -> np.ndarray:
    return model.predict_trajectory(x0, steps, bounds=bounds)
