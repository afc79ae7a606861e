"""Scikit-learn style wrappers around the adapters and trainer.

A fitted estimator is a single frozen-zero linear layer whose adapter is the
only trainable state, so these compose with the usual sklearn tooling
(clone, grid search, pipelines) while exercising exactly the same code paths
as the experiment harnesses.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .adapters import LowRankAdapter, SparseAdapter, WaveletAdapter
from .training import TrainConfig, train_linear

__all__ = ["SparseAdapterClassifier", "SparseAdapterRegressor"]


def _build_adapter(method, shape, budget, rank, family, level, lam, seed):
    if method == "shira":
        return SparseAdapter.create(shape, budget, seed, lam=lam)
    if method == "waveft":
        return WaveletAdapter.create(shape, budget, seed, family=family,
                                     level=level, lam=lam)
    if method == "lora":
        return LowRankAdapter.create(shape, rank, seed)
    raise ValueError(f"unknown method: {method!r}")


class _AdapterEstimator(BaseEstimator):
    def __init__(self, method="shira", budget=794, rank=1, wavelet_family="db1",
                 wavelet_level=None, lam=1.0, lr=0.01, betas=(0.9, 0.999),
                 eps=1e-8, gamma=0.5, step_epochs=5, epochs=50, batch_size=64,
                 random_state=0):
        self.method = method
        self.budget = budget
        self.rank = rank
        self.wavelet_family = wavelet_family
        self.wavelet_level = wavelet_level
        self.lam = lam
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.gamma = gamma
        self.step_epochs = step_epochs
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state

    def _train_config(self, loss):
        return TrainConfig(
            lr=self.lr, betas=self.betas, eps=self.eps, gamma=self.gamma,
            step_epochs=self.step_epochs, epochs=self.epochs,
            batch_size=self.batch_size, seed=int(self.random_state), loss=loss,
        )

    def _fit_layer(self, X, targets, out_dim, loss):
        shape = (out_dim, X.shape[1])
        self.W0_ = np.zeros(shape)
        self.adapter_ = _build_adapter(
            self.method, shape, self.budget, self.rank, self.wavelet_family,
            self.wavelet_level, self.lam, int(self.random_state),
        )
        self.report_ = train_linear(self.W0_, self.adapter_, (X, targets),
                                    self._train_config(loss))
        self.n_features_in_ = X.shape[1]
        return self

    def _raw_output(self, X):
        check_is_fitted(self, "adapter_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return self.adapter_.forward(self.W0_, X.T).T


class SparseAdapterClassifier(_AdapterEstimator, ClassifierMixin):
    """Softmax classifier over one adapter-parameterized linear layer."""

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("need at least two classes")
        return self._fit_layer(X, encoded, self.classes_.size, "cross_entropy")

    def decision_function(self, X):
        return self._raw_output(X)

    def predict_proba(self, X):
        logits = self._raw_output(X)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X):
        out = self._raw_output(X)  # validates fitted state first
        return self.classes_[np.argmax(out, axis=1)]


class SparseAdapterRegressor(_AdapterEstimator, RegressorMixin):
    """Least-squares regressor over one adapter-parameterized linear layer."""

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, multi_output=True)
        y = np.asarray(y, dtype=float)
        self._single_output = y.ndim == 1
        targets = y[:, None] if self._single_output else y
        return self._fit_layer(X, targets, targets.shape[1], "mse")

    def predict(self, X):
        out = self._raw_output(X)
        return out[:, 0] if self._single_output else out
