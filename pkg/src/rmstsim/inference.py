"""RMST-difference estimators, delta-method standard errors and the Z-test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.stats import norm

from .domain import (CovariateVector, ExpPHParams, FitResult, MISSPEC_TERMS, PiecewiseParams,
                     as_trial)
from .exceptions import NonEvaluable
from .kaplan_meier import km_fit_arrays, km_rmst, km_rmst_var
from .models import rmst_from_rate, rmst_piecewise_from_rates


class Method(str, Enum):
    NONPARAMETRIC = "nonparametric"
    FULL = "full"
    MISSPEC = "misspec"
    CROSSING = "crossing"


@dataclass(frozen=True)
class RmstDifference:
    """Treatment-minus-control RMST difference with its standard error."""

    delta_hat: float
    std_err: float
    method: Method
    t_star: float
    assumed_knot: Optional[float] = None
    clipped: bool = False

    @property
    def z(self) -> float:
        if self.std_err > 0:
            return self.delta_hat / self.std_err
        return math.nan


def numerical_gradient(fn: Callable[[np.ndarray], float], theta, rel_step: float = 1e-6
                       ) -> np.ndarray:
    """Central differences with step ``rel_step * max(1, |theta_j|)``."""
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for j in range(theta.size):
        h = rel_step * max(1.0, abs(theta[j]))
        up = theta.copy()
        dn = theta.copy()
        up[j] += h
        dn[j] -= h
        grad[j] = (fn(up) - fn(dn)) / (up[j] - dn[j])
    return grad


def delta_method_variance(gradient, covariance) -> tuple[float, bool]:
    """``g' S g``, clipped at zero; the flag reports whether clipping happened."""
    g = np.asarray(gradient, dtype=float)
    q = float(g @ np.asarray(covariance, dtype=float) @ g)
    if q < 0:
        return 0.0, True
    return q, False


def delta_method_se(delta_fn, params, covariance, gradient=None) -> float:
    """Delta-method standard error of ``delta_fn`` at ``params``.

    ``params`` is the parameter vector the covariance refers to.  Without an
    explicit ``gradient`` one is taken by central differences.
    """
    if gradient is None:
        gradient = numerical_gradient(delta_fn, params)
    var, _ = delta_method_variance(gradient, covariance)
    return math.sqrt(var)


# Non-parametric ---------------------------------------------------------------

def delta_nonparametric(records, t_star: float) -> RmstDifference:
    """Difference of per-arm Kaplan-Meier areas with Greenwood variances.

    Raises :class:`NonEvaluable` when either arm stops short of ``t_star``.
    """
    data = as_trial(records)
    treated = data.treatment == 1
    if treated.all() or not treated.any():
        raise NonEvaluable("one arm is empty")
    arm1 = km_fit_arrays(data.time[treated], data.event[treated])
    arm0 = km_fit_arrays(data.time[~treated], data.event[~treated])
    delta = km_rmst(arm1, t_star) - km_rmst(arm0, t_star)
    var = km_rmst_var(arm1, t_star) + km_rmst_var(arm0, t_star)
    return RmstDifference(delta, math.sqrt(var), Method.NONPARAMETRIC, t_star)


# Single exponential ------------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    """Covariate profile at which the two arms are compared.

    With ``x_base`` set, both arms sit at that subject with only the treatment
    bit changed.  Otherwise the difference is averaged over the inherit/sex
    mix of the trial population, each bit being Bernoulli(``covariate_prob``);
    this marginal is what carries the interaction into the treatment effect.
    """

    x_base: Optional[CovariateVector] = None
    covariate_prob: float = 0.5

    def __post_init__(self):
        if not 0 <= self.covariate_prob <= 1:
            raise ValueError("covariate_prob must lie in [0, 1]")

    def cells(self) -> list[tuple[CovariateVector, float]]:
        if self.x_base is not None:
            return [(self.x_base, 1.0)]
        p = self.covariate_prob
        out = []
        for inherit in (0, 1):
            for sex in (0, 1):
                w = (p if inherit else 1 - p) * (p if sex else 1 - p)
                if w > 0:
                    out.append((CovariateVector(0, inherit, sex), w))
        return out

    def rows(self, terms) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Design rows for the treated and control arm, and cell weights."""
        return _profile_rows(self, tuple(terms))


@lru_cache(maxsize=256)
def _profile_rows(profile: Profile, terms: tuple[str, ...]):
    z1, z0, w = [], [], []
    for x, weight in profile.cells():
        for arm, bucket in ((1, z1), (0, z0)):
            xa = x.with_treatment(arm)
            bucket.append([1.0] + [float(xa.term(t)) for t in terms])
        w.append(weight)
    out = (np.array(z1), np.array(z0), np.array(w))
    for arr in out:
        arr.setflags(write=False)
    return out


MARGINAL = Profile()


def _as_profile(profile) -> Profile:
    if profile is None:
        return MARGINAL
    if isinstance(profile, CovariateVector):
        return Profile(profile)
    return profile


def exponential_delta(theta, terms, t_star, profile=None) -> float:
    z1, z0, w = _as_profile(profile).rows(terms)
    theta = np.asarray(theta, dtype=float)
    mu1 = rmst_from_rate(t_star, np.exp(z1 @ theta))
    mu0 = rmst_from_rate(t_star, np.exp(z0 @ theta))
    return float(w @ (mu1 - mu0))


def exponential_delta_gradient(theta, terms, t_star, profile=None) -> np.ndarray:
    """Analytic gradient of :func:`exponential_delta` in ``(log lambda, beta)``.

    For ``mu = (1 - exp(-r t)) / r`` with ``r = exp(z'theta)``,
    ``d mu / d theta = z (t exp(-r t) - mu)``.
    """
    theta = np.asarray(theta, dtype=float)
    z1, z0, w = _as_profile(profile).rows(terms)
    out = np.zeros_like(theta)
    for sign, z in ((1.0, z1), (-1.0, z0)):
        r = np.exp(z @ theta)
        mu = -np.expm1(-r * t_star) / r
        out += sign * ((w * (t_star * np.exp(-r * t_star) - mu)) @ z)
    return out


def _delta_exponential(fit: FitResult, t_star, profile, method) -> RmstDifference:
    params = fit.params
    if not isinstance(params, ExpPHParams):
        raise TypeError("expected a single-exponential fit")
    if not t_star > 0:
        raise ValueError("t_star must be positive")
    theta = params.theta
    delta = exponential_delta(theta, params.terms, t_star, profile)
    grad = exponential_delta_gradient(theta, params.terms, t_star, profile)
    var, clipped = delta_method_variance(grad, fit.covariance)
    return RmstDifference(delta, math.sqrt(var), method, t_star, clipped=clipped)


def delta_full(fit: FitResult, t_star: float, profile=None) -> RmstDifference:
    """Parametric RMST difference from a fit over all four terms.

    ``profile`` is a :class:`Profile`, a :class:`CovariateVector` (reference
    subject), or ``None`` for the population-averaged difference.
    """
    return _delta_exponential(fit, t_star, profile, Method.FULL)


def delta_misspec(fit: FitResult, t_star: float, profile=None) -> RmstDifference:
    """As :func:`delta_full` for a fit that leaves out sex."""
    if set(fit.params.terms) != set(MISSPEC_TERMS):
        raise ValueError(f"expected terms {MISSPEC_TERMS}, got {fit.params.terms}")
    return _delta_exponential(fit, t_star, profile, Method.MISSPEC)


# Piecewise ------------------------------------------------------------------------

def _piecewise_delta_batch(thetas, terms, knot, t_star, profile) -> np.ndarray:
    """:func:`piecewise_delta` for every row of ``thetas`` at once."""
    k = len(terms) + 1
    z1, z0, w = _as_profile(profile).rows(terms)
    out = np.zeros(len(thetas))
    for sign, z in ((1.0, z1), (-1.0, z0)):
        ra = np.exp(thetas[:, :k] @ z.T)
        rb = np.exp(thetas[:, k:] @ z.T)
        out += sign * (rmst_piecewise_from_rates(t_star, ra, rb, knot) @ w)
    return out


def piecewise_delta(theta, terms, knot, t_star, profile=None) -> float:
    theta = np.asarray(theta, dtype=float)
    return float(_piecewise_delta_batch(theta[None, :], terms, knot, t_star, profile)[0])


def _central_gradient_batch(fn_batch, theta, rel_step: float = 1e-6) -> np.ndarray:
    """:func:`numerical_gradient` with all perturbed points evaluated in one call."""
    h = rel_step * np.maximum(1.0, np.abs(theta))
    step = np.diag(h)
    up, dn = theta + step, theta - step
    vals = fn_batch(np.vstack([up, dn]))
    p = theta.size
    return (vals[:p] - vals[p:]) / (np.diag(up) - np.diag(dn))


def delta_crossing(fit: FitResult, t_star: float, profile=None) -> RmstDifference:
    """RMST difference under a fitted knot model (the knot may be misspecified).

    The standard error uses central-difference gradients over both pieces.
    """
    params = fit.params
    if not isinstance(params, PiecewiseParams):
        raise TypeError("expected a piecewise fit")
    if not t_star > 0:
        raise ValueError("t_star must be positive")
    profile = _as_profile(profile)
    theta = params.theta
    batch = lambda th: _piecewise_delta_batch(th, params.terms, params.knot,  # noqa: E731
                                              t_star, profile)
    grad = _central_gradient_batch(batch, theta)
    var, clipped = delta_method_variance(grad, fit.covariance)
    return RmstDifference(float(batch(theta[None, :])[0]), math.sqrt(var), Method.CROSSING,
                          t_star, assumed_knot=params.knot, clipped=clipped)


def critical_value(alpha: float = 0.025) -> float:
    return float(norm.ppf(1.0 - alpha))


def z_test(diff: RmstDifference, alpha: float = 0.025) -> bool:
    """One-sided test of ``delta <= 0``: reject when ``z`` strictly exceeds the quantile."""
    if not diff.std_err > 0:
        raise ValueError("z-test needs a positive standard error")
    return diff.z > critical_value(alpha)
