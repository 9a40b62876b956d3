"""scikit-learn style front end.

``JackknifePseudoValues`` is a transformer that maps a response column to its
pseudo-values; ``JELInterval`` fits an interval for the U-statistic parameter
from one survey sample. Both expose ``get_params``/``set_params`` and so can be
cloned, grid-searched over ``level`` or ``method``, and placed in pipelines.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted, column_or_1d

from .designs import SurveySample
from .errors import InputError
from .inference import JEL_METHODS, METHODS, ProfileRatio, confidence_interval, design_effect
from .ustat import get_kernel, jackknife_pseudo_values


def check_response(y) -> np.ndarray:
    """1-D finite float vector (a single column is accepted)."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 2 and y.shape[1] == 1:
        y = y[:, 0]
    return column_or_1d(check_array(y, ensure_2d=False, dtype=float), warn=False)


def check_weights(w, n, name="sample_weight") -> np.ndarray:
    if w is None:
        return np.ones(n)
    w = column_or_1d(check_array(w, ensure_2d=False, dtype=float), warn=False)
    check_consistent_length(w, np.empty(n))
    if np.any(w <= 0):
        raise InputError(f"{name} must be strictly positive")
    return w


def check_aux(X, n):
    if X is None:
        return None
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    check_consistent_length(X, np.empty(n))
    return X


class JackknifePseudoValues(TransformerMixin, BaseEstimator):
    """Replace a response column by its jackknife pseudo-values.

    The transform is sample-wide: every output row depends on the whole input,
    as the pseudo-values of a U-statistic do.
    """

    def __init__(self, kernel="variance"):
        self.kernel = kernel

    def fit(self, y, _y=None):
        y = check_response(y)
        self.t_n_ = jackknife_pseudo_values(y, self.kernel).t_n
        self.n_features_in_ = 1
        return self

    def transform(self, y):
        check_is_fitted(self, "t_n_")
        return jackknife_pseudo_values(check_response(y), self.kernel).values[:, None]


class JELInterval(BaseEstimator):
    """Confidence interval for a U-statistic parameter from an unequal-probability sample.

    Parameters
    ----------
    kernel : str or Kernel, default="pwm"
    method : {"NA", "JEL", "JEL_d", "JEL_w"}, default="JEL"
    level : float, default=0.95
    x_bar : float or array-like, optional
        Known population mean of the auxiliary variables.

    Attributes
    ----------
    interval_ : tuple of float
    point_ : float
    ci_ : ConfidenceInterval
    pseudo_values_ : ndarray of shape (n_samples,)
    deff_, n_eff_ : float
    """

    def __init__(self, kernel="pwm", method="JEL", level=0.95, x_bar=None):
        self.kernel = kernel
        self.method = method
        self.level = level
        self.x_bar = x_bar

    def fit(self, y, sample_weight=None, X=None, calibration_weight=None):
        """``sample_weight`` holds design weights ``1/pi``; ``X`` the auxiliary variables."""
        if self.method not in METHODS:
            raise InputError(f"method must be one of {METHODS}, got {self.method!r}")
        get_kernel(self.kernel)
        y = check_response(y)
        n = y.size
        d = check_weights(sample_weight, n)
        w = None if calibration_weight is None else check_weights(calibration_weight, n, "calibration_weight")
        X = check_aux(X, n)
        sample = SurveySample(y, d.min() / d, X, w)
        pv = jackknife_pseudo_values(y, self.kernel)
        self.ci_ = confidence_interval(sample, pv, self.method, self.level, self.x_bar)
        if self.method in JEL_METHODS:
            summary = ProfileRatio(sample, pv, self.method, self.x_bar).summary
        else:
            summary = design_effect(sample, pv, "H")
        self.pseudo_values_ = pv.values
        self.t_n_ = pv.t_n
        self.point_ = self.ci_.point
        self.interval_ = (self.ci_.lower, self.ci_.upper)
        self.deff_ = summary.deff
        self.n_eff_ = summary.n_eff
        return self

    def covers(self, theta) -> bool:
        check_is_fitted(self, "ci_")
        return self.ci_.covers(theta)
