"""scikit-learn style wrappers around the functional API.

Nothing here is learned from data; ``fit`` validates the parameters and
freezes the derived objects, so the wrappers drop into pipelines and
``GridSearchCV``-style parameter sweeps.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .model import ModelParams, SemiexpFamily, TruncationParams
from .phase import REGIMES, classify
from .rates import RateParams, canonical_rate_id, rate_values


class RateCurve(TransformerMixin, BaseEstimator):
    """Maps a column of ``y`` values to ``I(y)`` for one rate function."""

    def __init__(self, rate_id="gaussian", epsilon=0.5, q=1.0, sigma2=1.0, c=None):
        self.rate_id = rate_id
        self.epsilon = epsilon
        self.q = q
        self.sigma2 = sigma2
        self.c = c

    def fit(self, X=None, y=None):
        self.rate_id_ = canonical_rate_id(self.rate_id)
        self.params_ = RateParams(ModelParams(self.epsilon, self.q, self.sigma2), self.c)
        if X is not None:
            self.n_features_in_ = check_array(X).shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, ensure_all_finite=True)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single column of y values, got {X.shape[1]}")
        return rate_values(self.rate_id_, self.params_, X[:, 0]).reshape(-1, 1)


class RegimeClassifier(ClassifierMixin, BaseEstimator):
    """Predicts the regime for rows ``(alpha, beta)``; ``beta = inf`` means uncapped."""

    def __init__(self, epsilon=0.5, q=1.0, sigma2=1.0, c=1.0, y=None):
        self.epsilon = epsilon
        self.q = q
        self.sigma2 = sigma2
        self.c = c
        self.y = y

    def fit(self, X=None, y=None):
        self.model_ = ModelParams(self.epsilon, self.q, self.sigma2)
        self.classes_ = np.array(REGIMES)
        if X is not None:
            self.n_features_in_ = check_array(X, ensure_all_finite=False).shape[1]
        return self

    def _infos(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, ensure_all_finite=False)
        if X.shape[1] != 2:
            raise ValueError("expected columns (alpha, beta)")
        return [classify(a, b, self.model_, self.c, self.y) for a, b in X]

    def predict(self, X):
        return np.array([info.regime for info in self._infos(X)], dtype=object)

    def speed_exponents(self, X):
        return np.array([np.nan if i.speed_exponent is None else i.speed_exponent for i in self._infos(X)])


class TailProbabilityEstimator(BaseEstimator):
    """Monte Carlo ``log P(T_N >= N**alpha * y)`` for rows ``(N, y)``.

    ``method`` is ``naive`` or ``big_jump_split``.  ``beta=None`` leaves the
    family uncapped.  ``predict`` returns log probabilities; the full
    results of the last call are kept in ``results_``.
    """

    def __init__(self, kind="symmetric", epsilon=0.5, q=1.0, beta=None, c=1.0, alpha=0.6,
                 method="naive", samples=10_000, seed=0, n_jobs=1):
        self.kind = kind
        self.epsilon = epsilon
        self.q = q
        self.beta = beta
        self.c = c
        self.alpha = alpha
        self.method = method
        self.samples = samples
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        from .mc import big_jump_split_estimate, naive_estimate

        runners = {"naive": naive_estimate, "big_jump_split": big_jump_split_estimate}
        if self.method not in runners:
            raise ValueError(f"method must be one of {sorted(runners)}, got {self.method!r}")
        self.family_ = SemiexpFamily.weibull(self.kind, self.epsilon, self.q)
        self.trunc_ = None if self.beta is None else TruncationParams(self.beta, self.c)
        self._run = runners[self.method]
        return self

    def predict(self, X):
        check_is_fitted(self, "family_")
        X = check_array(X)
        if X.shape[1] != 2:
            raise ValueError("expected columns (N, y)")
        self.results_ = [
            self._run(self.family_, self.trunc_, int(n), self.alpha, float(yv), self.samples, self.seed,
                      n_jobs=self.n_jobs)
            for n, yv in X
        ]
        return np.array([r.log_prob for r in self.results_])
