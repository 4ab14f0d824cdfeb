"""Closed-form hazards, survival curves and RMST for exponential models.

Everything here is expressed through the subject-specific rate
``r = lambda * exp(beta' x)``; the array helpers (``*_rates``) are what the
simulator and estimators call on whole datasets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import CovariateVector, ExpPHParams, PiecewiseParams, TrialData, linear_predictor


def _check_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


def rate(params: ExpPHParams, x: CovariateVector) -> float:
    return params.lam * math.exp(linear_predictor(params, x))


def rates(params: ExpPHParams, data: TrialData) -> np.ndarray:
    """Per-subject hazard rates for every row of ``data``."""
    eta = data.design(params.terms) @ np.asarray(params.beta, dtype=float)
    return params.lam * np.exp(eta)


def rmst_from_rate(t_star, r):
    """Area under ``exp(-r t)`` on ``[0, t_star]``; broadcasts."""
    t_star = np.asarray(t_star, dtype=float)
    r = np.asarray(r, dtype=float)
    return -np.expm1(-r * t_star) / r


def rmst_piecewise_from_rates(t_star, ra, rb, knot):
    """RMST of a two-piece exponential survival curve; broadcasts.

    Past the knot the area is the full first-piece area plus the survival at
    the knot times the area of the second piece restarted at the knot.
    ``t_star == knot`` takes the second branch, which is continuous there.
    """
    t_star = np.asarray(t_star, dtype=float)
    ra = np.asarray(ra, dtype=float)
    rb = np.asarray(rb, dtype=float)
    first = -np.expm1(-ra * np.minimum(t_star, knot)) / ra
    tail = np.exp(-ra * knot) * (-np.expm1(-rb * np.maximum(t_star - knot, 0.0)) / rb)
    return np.where(t_star < knot, first, first + tail)


def cumhaz_piecewise_from_rates(t, ra, rb, knot):
    t = np.asarray(t, dtype=float)
    return np.where(t < knot, ra * t, ra * knot + rb * (t - knot))


def rmst_exponential(t_star: float, params: ExpPHParams, x: CovariateVector) -> float:
    _check_positive("t_star", t_star)
    return float(rmst_from_rate(t_star, rate(params, x)))


def rmst_piecewise(t_star: float, params: PiecewiseParams, x: CovariateVector) -> float:
    _check_positive("t_star", t_star)
    return float(rmst_piecewise_from_rates(t_star, rate(params.before, x),
                                           rate(params.after, x), params.knot))


def hazard(t, params, x: CovariateVector):
    t = np.asarray(t, dtype=float)
    if isinstance(params, PiecewiseParams):
        return np.where(t < params.knot, rate(params.before, x), rate(params.after, x))
    return np.full_like(t, rate(params, x))


def cumulative_hazard(t, params, x: CovariateVector):
    t = np.asarray(t, dtype=float)
    if isinstance(params, PiecewiseParams):
        return cumhaz_piecewise_from_rates(t, rate(params.before, x),
                                           rate(params.after, x), params.knot)
    return rate(params, x) * t


def survival(t, params, x: CovariateVector):
    return np.exp(-cumulative_hazard(t, params, x))


def survival_piecewise(t, params: PiecewiseParams, x: CovariateVector):
    """``exp(-H(t))`` for the knot model; scalar in, scalar out."""
    out = survival(t, params, x)
    return float(out) if np.ndim(out) == 0 else out


def rmst(t_star, params, x: CovariateVector) -> float:
    if isinstance(params, PiecewiseParams):
        return rmst_piecewise(t_star, params, x)
    return rmst_exponential(t_star, params, x)


def arm_average_survival(t, params, treatment: int, prob: float = 0.5):
    """Survival of one arm averaged over the Bernoulli(prob) inherit/sex mix."""
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    for inherit in (0, 1):
        for sex in (0, 1):
            w = (prob if inherit else 1 - prob) * (prob if sex else 1 - prob)
            total = total + w * survival(t, params, CovariateVector(treatment, inherit, sex))
    return total


@dataclass(frozen=True)
class SurvivalCurve:
    """Analytic survival curve of one covariate profile."""

    params: ExpPHParams | PiecewiseParams
    x: CovariateVector

    def __call__(self, t):
        return survival(t, self.params, self.x)

    def hazard(self, t):
        return hazard(t, self.params, self.x)

    def cumulative_hazard(self, t):
        return cumulative_hazard(t, self.params, self.x)

    def rmst(self, t_star: float) -> float:
        return rmst(t_star, self.params, self.x)


def sample_from_rates(u, r):
    u = np.asarray(u, dtype=float)
    return -np.log(u) / r


def sample_piecewise_from_rates(u, ra, rb, knot):
    """Invert the two-piece cumulative hazard at ``-log(u)``."""
    target = -np.log(np.asarray(u, dtype=float))
    at_knot = ra * knot
    return np.where(target < at_knot, target / ra, knot + (target - at_knot) / rb)


def sample_event_time(params, x: CovariateVector, u: float) -> float:
    """Inverse-CDF draw of an event time from ``u`` in the open unit interval."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"u must lie strictly inside (0, 1), got {u!r}")
    if isinstance(params, PiecewiseParams):
        return float(sample_piecewise_from_rates(u, rate(params.before, x),
                                                 rate(params.after, x), params.knot))
    return float(sample_from_rates(u, rate(params, x)))
