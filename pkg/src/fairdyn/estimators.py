"""scikit-learn style wrappers.

The dynamics are not a learning problem, so only the decision rule and the
score reduction are exposed this way.  ``fit`` solves for thresholds from a
known scenario; it does not estimate anything from ``y``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .highdim import GaussianClass, gaussian_group, score
from .model import Constraint, QualState, TransitionMatrix, qualification_profile
from .policy import optimal_thresholds


class FairThresholdClassifier(ClassifierMixin, BaseEstimator):
    """Group-wise threshold rule for a fixed scenario and qualification state.

    Input rows are ``(feature, group)`` with group 0 for A and 1 for B.
    """

    def __init__(self, scenario=None, constraint="UN", alpha_a=0.5, alpha_b=0.5):
        self.scenario = scenario
        self.constraint = constraint
        self.alpha_a = alpha_a
        self.alpha_b = alpha_b

    def fit(self, X=None, y=None):
        if self.scenario is None:
            raise ValueError("a scenario is required")
        self.constraint_ = Constraint.parse(self.constraint)
        self.state_ = QualState(self.alpha_a, self.alpha_b)
        self.thresholds_ = optimal_thresholds(self.scenario, self.state_, self.constraint_)
        self.classes_ = np.array([0, 1])
        return self

    def _split(self, X):
        X = check_array(X, ensure_min_features=2)
        if X.shape[1] != 2:
            raise ValueError("expected rows of (feature, group)")
        grp = X[:, 1]
        if not np.all(np.isin(grp, (0, 1))):
            raise ValueError("group column must contain 0 (A) or 1 (B)")
        return X[:, 0], grp.astype(int)

    def predict(self, X):
        check_is_fitted(self, "thresholds_")
        x, grp = self._split(X)
        theta = np.where(grp == 0, self.thresholds_.theta_a, self.thresholds_.theta_b)
        return (x >= theta).astype(int)

    def predict_proba(self, X):
        """Posterior P(Y=1 | x, group) under the current qualification rates."""
        check_is_fitted(self, "thresholds_")
        x, grp = self._split(X)
        p = np.empty(x.shape)
        for g, group, alpha in ((0, self.scenario.group_a, self.state_.alpha_a),
                                (1, self.scenario.group_b, self.state_.alpha_b)):
            m = grp == g
            if m.any():
                p[m] = qualification_profile(group, alpha, x[m])
        return np.column_stack([1.0 - p, p])


class ScoreTransformer(TransformerMixin, BaseEstimator):
    """Map multivariate Gaussian features to the scalar sufficient score."""

    def __init__(self, mean0=None, cov0=None, mean1=None, cov1=None):
        self.mean0 = mean0
        self.cov0 = cov0
        self.mean1 = mean1
        self.cov1 = cov1

    def fit(self, X=None, y=None):
        if any(v is None for v in (self.mean0, self.cov0, self.mean1, self.cov1)):
            raise ValueError("class means and covariances are required")
        # transitions and share are irrelevant to the score itself
        self.group_ = gaussian_group(GaussianClass(self.mean0, self.cov0),
                                     GaussianClass(self.mean1, self.cov1),
                                     TransitionMatrix(0.5, 0.5, 0.5, 0.5), 0.5)
        self.n_features_in_ = self.group_.dim
        return self

    def transform(self, X):
        check_is_fitted(self, "group_")
        X = check_array(X)
        return np.asarray(score(self.group_, X)).reshape(-1, 1)

    @property
    def log_partition_diff(self) -> float:
        check_is_fitted(self, "group_")
        return self.group_.log_partition_diff
