"""scikit-learn compatible wrapper around the log-log power-law fit."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .device_models import delta_vt_powerlaw, fit_powerlaw_slope
from .errors import DomainError


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """Fit ``delta_vt = a * t**n`` by least squares in log-log space.

    Parameters
    ----------
    warn_range : bool, default=True
        Emit a ``PowerLawRangeWarning`` when the fitted slope falls outside
        the usual 0.15-0.30 technology range.

    Attributes
    ----------
    prefactor_ : float
        Fitted ``a``.
    slope_ : float
        Fitted power-law slope ``n``.
    """

    def __init__(self, warn_range=True):
        self.warn_range = warn_range

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=2)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single time column, got {X.shape[1]}")
        points = np.column_stack([X[:, 0], y])
        self.prefactor_, self.slope_ = fit_powerlaw_slope(points, warn_range=self.warn_range)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, ["prefactor_", "slope_"])
        X = check_array(X)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single time column, got {X.shape[1]}")
        if np.any(X < 0):
            raise DomainError("times must be non-negative")
        return np.asarray(delta_vt_powerlaw(self.prefactor_, self.slope_, X[:, 0]))
