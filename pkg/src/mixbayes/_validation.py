"""Input checks shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array


def check_observations(X, min_samples: int = 1) -> np.ndarray:
    """Return a finite 1-D float array from a vector or a one-column matrix."""
    arr = check_array(X, ensure_2d=False, dtype=np.float64, ensure_min_samples=min_samples)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected one feature, got {arr.shape[1]}")
        arr = arr[:, 0]
    return np.ascontiguousarray(arr)


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
