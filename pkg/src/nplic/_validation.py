"""Input checks shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array


def check_features(X, n_features):
    X = check_array(X, dtype=np.float64, ensure_min_samples=0)
    if X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} feature columns, got {X.shape[1]}")
    return X


def check_targets(y, n_samples):
    y = check_array(y, dtype=np.float64, ensure_2d=False, ensure_min_samples=0)
    if y.ndim != 1:
        y = y.reshape(-1)
    if len(y) != n_samples:
        raise ValueError(f"got {len(y)} targets for {n_samples} samples")
    return y


def check_alphas(alphas):
    alphas = np.asarray(alphas, dtype=float).reshape(-1)
    if not np.all(np.isfinite(alphas)) or np.any((alphas < 0.0) | (alphas > 1.0)):
        raise ValueError("alpha0 values must lie in [0, 1]")
    return alphas
