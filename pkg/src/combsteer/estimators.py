"""scikit-learn style wrappers.

:class:`SteeringTransformer` turns a stack of covariance matrices into a
feature matrix of steerabilities, one column per bipartition.
:class:`CombCovarianceTransformer` maps eigenmode squeezing vectors to
band-resolved covariance matrices. Both work in pipelines and support
``get_params``/``set_params`` and cloning.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_covariance_stack, check_partition
from .comb import default_model
from .exceptions import DimensionError
from .gaussian import CovarianceMatrix
from .steering import enumerate_bipartitions, steering_many

__all__ = ["SteeringTransformer", "CombCovarianceTransformer"]


class SteeringTransformer(TransformerMixin, BaseEstimator):
    """Steerability features of Gaussian states.

    Parameters
    ----------
    mode : {"full", "pairs"}
        Enumeration used when ``partitions`` is None.
    partitions : sequence, optional
        Explicit bipartitions (``Bipartition`` or ``(steering, steered)``).
    n_jobs : int
        Worker processes per state.
    check_physical : bool
        Validate every input state.

    Attributes
    ----------
    n_modes_ : int
    partitions_ : list of Bipartition
    """

    def __init__(self, mode="full", partitions=None, n_jobs=1, check_physical=True):
        self.mode = mode
        self.partitions = partitions
        self.n_jobs = n_jobs
        self.check_physical = check_physical

    def fit(self, X, y=None):
        arr = check_covariance_stack(X, self.check_physical)
        self.n_modes_ = arr.shape[1] // 2
        if self.partitions is None:
            self.partitions_ = enumerate_bipartitions(self.n_modes_, self.mode)
        else:
            self.partitions_ = [check_partition(p, self.n_modes_) for p in self.partitions]
        self.n_features_in_ = arr.shape[1] * arr.shape[2]
        return self

    def transform(self, X):
        check_is_fitted(self, "partitions_")
        arr = check_covariance_stack(X, self.check_physical)
        if arr.shape[1] // 2 != self.n_modes_:
            raise DimensionError(
                f"fitted on {self.n_modes_}-mode states, got {arr.shape[1] // 2} modes"
            )
        out = np.empty((len(arr), len(self.partitions_)))
        for i, sigma in enumerate(arr):
            results = steering_many(CovarianceMatrix(sigma), self.partitions_, self.n_jobs)
            out[i] = [r.value for r in results]
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "partitions_")
        return np.array([p.describe() for p in self.partitions_], dtype=object)


class CombCovarianceTransformer(TransformerMixin, BaseEstimator):
    """Covariance matrices of a comb model for rows of eigenmode squeezing.

    Parameters
    ----------
    model : CombModel or ExplicitModeModel, optional
        Defaults to the shipped default fixture.
    n_pixels : {4, 8, 16}, optional
        Override the model's resolution (comb models only).
    flatten : bool
        Return (n, 4P^2) rows instead of (n, 2P, 2P) matrices.
    """

    def __init__(self, model=None, n_pixels=None, flatten=False):
        self.model = model
        self.n_pixels = n_pixels
        self.flatten = flatten

    def fit(self, X=None, y=None):
        model = default_model() if self.model is None else self.model
        if self.n_pixels is not None:
            model = model.with_pixels(self.n_pixels)
        self.model_ = model
        self.n_features_in_ = len(model.squeezing_db)
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(
                f"expected {self.n_features_in_} squeezing values per row, got {X.shape[1]}"
            )
        sigmas = self.model_.covariance_batch(X)
        return sigmas.reshape(len(X), -1) if self.flatten else sigmas
