"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionError, UnphysicalStateError
from .gaussian import Bipartition, CovarianceMatrix, validate


def check_covariance_stack(X, physical: bool = True) -> np.ndarray:
    """Coerce ``X`` to a float array of shape (n_states, 2N, 2N).

    Accepts a single matrix, a stack, or a sequence of
    :class:`CovarianceMatrix`. With ``physical`` every state must pass
    :func:`validate`.
    """
    if isinstance(X, CovarianceMatrix):
        X = [X]
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], CovarianceMatrix):
        X = [cm.matrix for cm in X]
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2] or arr.shape[1] % 2 or arr.shape[1] == 0:
        raise DimensionError(f"expected (n_states, 2N, 2N) covariance matrices, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("covariance matrices contain NaN or inf")
    if physical:
        for i, sigma in enumerate(arr):
            verdict = validate(sigma)
            if not verdict.valid:
                raise UnphysicalStateError(
                    f"state {i}: {verdict.failures[0].message}", verdict
                )
    return arr


def check_partition(part, n_modes: int) -> Bipartition:
    """Accept a :class:`Bipartition` or a ``(steering, steered)`` pair."""
    if not isinstance(part, Bipartition):
        steering, steered = part
        part = Bipartition(steering, steered)
    return part.check(n_modes)
