"""Input validation helpers for the estimator API."""
from __future__ import annotations

import numpy as np


def check_array(X, name: str = "X") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError(f"{name} has no rows")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or infinity")
    return X


def check_X_y(X, y) -> tuple[np.ndarray, np.ndarray]:
    """Validate a feature matrix with integer class labels."""
    X = check_array(X)
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"y must be 1-D, got shape {y.shape}")
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if not np.issubdtype(y.dtype, np.integer):
        yi = y.astype(int)
        if not np.all(yi == y):
            raise ValueError("y must contain integer class labels")
        y = yi
    return X, y


def check_is_fitted(estimator, attribute: str = "coef_") -> None:
    if getattr(estimator, attribute, None) is None:
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted yet; call fit(X, y) first")
