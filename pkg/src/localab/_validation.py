"""Input checks shared by the numerical modules."""

import numpy as np
from sklearn.utils import check_array


def check_matrix(W, name="W", allow_complex=False):
    """Return ``W`` as a finite 2-D float (or complex) array.

    Raises ``ValueError`` on empty, non-2-D or non-finite input.
    """
    if allow_complex and np.iscomplexobj(W):
        W = np.asarray(W, dtype=complex)
        if W.ndim != 2 or W.size == 0:
            raise ValueError(f"{name} must be a non-empty 2-D array, got shape {W.shape}")
        if not np.all(np.isfinite(W)):
            raise ValueError(f"{name} contains NaN or Inf")
        return W
    try:
        return check_array(W, dtype=np.float64, ensure_2d=True, ensure_min_samples=1,
                           ensure_min_features=1, input_name=name)
    except ValueError as exc:
        raise ValueError(f"{name}: {exc}") from exc


def check_same_shape(A, B, names=("A", "B")):
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {names[0]} {A.shape} vs {names[1]} {B.shape}")


def check_square(W, name="W"):
    if W.shape[0] != W.shape[1]:
        raise ValueError(f"{name} must be square, got {W.shape}")
    return W.shape[0]
