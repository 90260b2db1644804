"""Input validation helpers shared across modules."""
from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .exceptions import ParameterError


def check_points(X, d: int | None = None, name: str = "X") -> np.ndarray:
    """Return ``X`` as a finite float array of shape ``(n, d)`` with ``n >= 1``."""
    try:
        X = check_array(X, dtype=np.float64, ensure_2d=False, input_name=name)
    except ValueError as exc:
        raise ParameterError(str(exc)) from exc
    if X.ndim == 1:
        X = X.reshape(-1, 1) if d == 1 else X.reshape(1, -1)
    if X.ndim != 2:
        raise ParameterError(f"{name} must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ParameterError(f"{name} is empty")
    if d is not None and X.shape[1] != d:
        raise ParameterError(f"{name} has dimension {X.shape[1]}, expected {d}")
    return X


def check_state(x, d: int | None = None, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1:
        raise ParameterError(f"{name} must be a single state vector, got shape {x.shape}")
    if d is not None and x.shape[0] != d:
        raise ParameterError(f"{name} has dimension {x.shape[0]}, expected {d}")
    if not np.all(np.isfinite(x)):
        raise ParameterError(f"{name} contains non-finite values")
    return x


def check_square(M, name: str = "M") -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ParameterError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ParameterError(f"{name} contains non-finite values")
    return M


def check_positive(value, name: str, allow_zero: bool = False) -> float:
    value = float(value)
    ok = value >= 0 if allow_zero else value > 0
    if not (np.isfinite(value) and ok):
        bound = "non-negative" if allow_zero else "positive"
        raise ParameterError(f"{name} must be {bound}, got {value!r}")
    return value
