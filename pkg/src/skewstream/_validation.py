"""Input validation shared by the estimator and the engine."""

import numpy as np
from sklearn.utils import check_array

from .types import CurrentTensor


def check_event_array(X, n_categorical, clamp_epsilon=1e-6):
    """Validate an event matrix ``[time, categorical..., continuous...]``.

    Returns ``(times, cats, conts)``. Categorical columns must hold
    non-negative integers; continuous values ``<= 0`` are clamped.
    """
    X = check_array(X, dtype=np.float64, ensure_min_samples=0, ensure_all_finite=True)
    if n_categorical is None:
        raise ValueError("n_categorical must be set to read an event matrix")
    if X.shape[1] < 1 + n_categorical or X.shape[1] == 1:
        raise ValueError(f"event matrix needs a time column, {n_categorical} categorical "
                         f"column(s) and at least one attribute; got {X.shape[1]} columns")
    times = X[:, 0]
    if np.any(np.diff(times) < 0):
        raise ValueError("events must be sorted by time")
    cats = X[:, 1:1 + n_categorical]
    if np.any(cats < 0) or np.any(cats != np.floor(cats)):
        raise ValueError("categorical columns must hold non-negative integer codes")
    conts = np.where(X[:, 1 + n_categorical:] > 0, X[:, 1 + n_categorical:], clamp_epsilon)
    return times, cats.astype(np.int64), conts


def check_windows(windows):
    windows = list(windows)
    for w in windows:
        if not isinstance(w, CurrentTensor):
            raise TypeError(f"expected CurrentTensor, got {type(w).__name__}")
    return windows
