"""scikit-learn compatible estimators.

Data follow the scikit-learn convention ``X`` of shape
``(n_samples, n_features)``. The functional API works on ``A = X.T``
(features x samples), so the basis ``Q`` found by a rank-revealing run
spans the feature space and ``transform(X) = X @ Q``, as in
:class:`sklearn.decomposition.TruncatedSVD`.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .linalg import RngStream, svd_small
from .randomized import RankRevealConfig, rank_reveal
from .rpca import RpcaConfig, alm_rpca

__all__ = ["RankRevealingApproximation", "RobustPCA"]


def _stream(random_state):
    if random_state is None:
        return RngStream(0)
    if isinstance(random_state, (int, np.integer)):
        return RngStream(int(random_state))
    raise ValueError("random_state must be None or an int seed")


class RankRevealingApproximation(TransformerMixin, BaseEstimator):
    """Low-rank projection whose rank is chosen by a spectral threshold.

    Keeps every direction whose estimated singular value exceeds
    ``threshold``; the number kept is found adaptively, ``block_size``
    directions at a time.

    Attributes
    ----------
    components_ : ndarray of shape (n_components_, n_features)
    singular_values_ : ndarray of shape (n_components_,)
    n_components_ : int
    threshold_reached_ : bool
        False when the run stopped at ``max_rank`` before the threshold.
    """

    def __init__(self, threshold=1e-8, block_size=10, power_iters=1, max_rank=None,
                 stabilized=True, random_state=None):
        self.threshold = threshold
        self.block_size = block_size
        self.power_iters = power_iters
        self.max_rank = max_rank
        self.stabilized = stabilized
        self.random_state = random_state

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64)
        cfg = RankRevealConfig(threshold=self.threshold, block_size=self.block_size,
                               power_iters=self.power_iters, max_rank=self.max_rank,
                               stabilized=self.stabilized)
        res = rank_reveal(X.T, cfg, _stream(self.random_state))
        self.components_ = res.Q.T
        self.singular_values_ = res.sing_vals
        self.n_components_ = res.rank
        self.threshold_reached_ = res.threshold_reached
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return X @ self.components_.T

    def inverse_transform(self, Xt):
        check_is_fitted(self, "components_")
        return np.asarray(Xt, dtype=np.float64) @ self.components_


class RobustPCA(TransformerMixin, BaseEstimator):
    """Split ``X`` into a low-rank part and a sparse outlier part.

    ``fit`` solves the decomposition on the training data and stores it in
    ``low_rank_`` and ``sparse_``. ``transform`` projects samples onto the
    row space of the learned low-rank part.
    ``lam=None`` uses ``1 / sqrt(max(n_samples, n_features))``.

    Attributes
    ----------
    low_rank_, sparse_ : ndarray of shape (n_samples, n_features)
    components_ : ndarray of shape (rank, n_features)
    n_iter_ : int
    converged_ : bool
    relerror_trace_ : list of float
    """

    def __init__(self, lam=None, mu0=1e-3, rho=1.1, max_iters=100, tol=9e-5, backend="exact",
                 block_size=10, power_iters=0, random_state=None):
        self.lam = lam
        self.mu0 = mu0
        self.rho = rho
        self.max_iters = max_iters
        self.tol = tol
        self.backend = backend
        self.block_size = block_size
        self.power_iters = power_iters
        self.random_state = random_state

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64)
        cfg = RpcaConfig(lam=self.lam, mu0=self.mu0, rho=self.rho, max_iters=self.max_iters,
                         tol=self.tol, backend=self.backend, block_size=self.block_size,
                         power_iters=self.power_iters)
        state = alm_rpca(X.T, cfg, _stream(self.random_state))
        self.low_rank_ = state.L.T
        self.sparse_ = state.S.T
        self.n_iter_ = state.iter
        self.converged_ = state.converged
        self.relerror_trace_ = list(state.relerror_trace)
        _, s, V = svd_small(self.low_rank_)
        tol = max(self.low_rank_.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
        self.components_ = V[:, s > tol].T
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return (X @ self.components_.T) @ self.components_
