"""scikit-learn style wrappers over the functional core.

``X`` is an ``(n, 3)`` array of 0/1 columns (treatment, inherit, sex) and
``y`` an ``(n, 2)`` array of (follow-up time, event indicator).  The
interaction column is derived, never passed in.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .domain import FULL_TERMS, MISSPEC_TERMS, TrialData
from .inference import (Profile, critical_value, delta_crossing, delta_full, delta_misspec,
                        delta_nonparametric)
from .mle import FitConfig, fit_exponential, fit_piecewise
from .models import rates, rmst_from_rate, rmst_piecewise_from_rates


def _covariates(X) -> np.ndarray:
    X = check_array(X, dtype=float)
    if X.shape[1] != 3:
        raise ValueError(f"X needs 3 columns (treatment, inherit, sex), got {X.shape[1]}")
    if not np.isin(X, (0.0, 1.0)).all():
        raise ValueError("covariates must be coded 0/1")
    return X.astype(np.int8)


def _trial(X, y) -> TrialData:
    X, y = check_X_y(X, y, dtype=float, multi_output=True)
    if y.ndim != 2 or y.shape[1] != 2:
        raise ValueError("y needs 2 columns (time, event)")
    X = _covariates(X)
    return TrialData(y[:, 0], y[:, 1], X[:, 0], X[:, 1], X[:, 2])


def _design_only(X) -> TrialData:
    X = _covariates(X)
    return TrialData(np.zeros(len(X)), np.zeros(len(X)), X[:, 0], X[:, 1], X[:, 2])


class _ExpBase(BaseEstimator):
    def _fit_config(self) -> FitConfig:
        return FitConfig(max_iterations=self.max_iterations,
                         gradient_tolerance=self.gradient_tolerance)

    def _store(self, fit):
        self.fit_ = fit
        self.params_ = fit.params
        self.covariance_ = fit.covariance
        self.loglik_ = fit.loglik
        self.n_iter_ = fit.iterations
        self.n_features_in_ = 3
        return self


class ExponentialPHRegressor(_ExpBase):
    """Exponential proportional-hazards model; ``predict`` returns RMST.

    Parameters
    ----------
    terms : tuple of str
        Model terms, drawn from treatment, inherit, sex, interaction.
    t_star : float
        Horizon used by :meth:`predict`.
    """

    def __init__(self, terms=FULL_TERMS, t_star=100.0, max_iterations=50,
                 gradient_tolerance=1e-8):
        self.terms = terms
        self.t_star = t_star
        self.max_iterations = max_iterations
        self.gradient_tolerance = gradient_tolerance

    def fit(self, X, y):
        return self._store(fit_exponential(_trial(X, y), tuple(self.terms), self._fit_config()))

    def predict_rate(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        return rates(self.params_, _design_only(X))

    def predict_survival(self, X, t) -> np.ndarray:
        """``S(t | x)`` for each row of ``X`` at a scalar ``t``."""
        return np.exp(-self.predict_rate(X) * float(t))

    def predict(self, X) -> np.ndarray:
        return rmst_from_rate(self.t_star, self.predict_rate(X))


class PiecewiseExponentialPHRegressor(_ExpBase):
    """One-knot piecewise-exponential PH model with separate pieces."""

    def __init__(self, knot=40.0, terms=FULL_TERMS, t_star=100.0, max_iterations=50,
                 gradient_tolerance=1e-8):
        self.knot = knot
        self.terms = terms
        self.t_star = t_star
        self.max_iterations = max_iterations
        self.gradient_tolerance = gradient_tolerance

    def fit(self, X, y):
        fit = fit_piecewise(_trial(X, y), tuple(self.terms), float(self.knot), self._fit_config())
        return self._store(fit)

    def _rates(self, X):
        check_is_fitted(self, "params_")
        data = _design_only(X)
        return rates(self.params_.before, data), rates(self.params_.after, data)

    def predict(self, X) -> np.ndarray:
        ra, rb = self._rates(X)
        return rmst_piecewise_from_rates(self.t_star, ra, rb, self.params_.knot)


class RMSTDifferenceTest(BaseEstimator):
    """One-sided test that treatment raises RMST at ``t_star``.

    ``method`` is ``nonparametric``, ``full``, ``misspec`` or ``crossing``
    (the last needs ``knot``).  After ``fit`` the estimate, its standard
    error, ``z_`` and the decision ``reject_`` are available.
    """

    def __init__(self, method="full", t_star=100.0, knot=None, alpha=0.025,
                 covariate_prob=0.5):
        self.method = method
        self.t_star = t_star
        self.knot = knot
        self.alpha = alpha
        self.covariate_prob = covariate_prob

    def fit(self, X, y):
        data = _trial(X, y)
        profile = Profile(covariate_prob=self.covariate_prob)
        t_star = float(self.t_star)
        if self.method == "nonparametric":
            diff = delta_nonparametric(data, t_star)
        elif self.method == "full":
            diff = delta_full(fit_exponential(data, FULL_TERMS), t_star, profile)
        elif self.method == "misspec":
            diff = delta_misspec(fit_exponential(data, MISSPEC_TERMS), t_star, profile)
        elif self.method == "crossing":
            if self.knot is None:
                raise ValueError("the crossing method needs a knot")
            diff = delta_crossing(fit_piecewise(data, FULL_TERMS, float(self.knot)),
                                  t_star, profile)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.result_ = diff
        self.delta_ = diff.delta_hat
        self.std_err_ = diff.std_err
        self.z_ = diff.z
        self.reject_ = bool(diff.z > critical_value(self.alpha))
        self.n_features_in_ = 3
        return self


__all__ = ["ExponentialPHRegressor", "PiecewiseExponentialPHRegressor", "RMSTDifferenceTest"]
