"""Maximum likelihood for exponential and piecewise-exponential PH models.

The exponential PH log-likelihood with right censoring is

    l(theta) = sum_i d_i z_i'theta - sum_i t_i exp(z_i'theta),

with ``z_i = (1, x_i)`` and ``theta = (log lambda, beta)``.  It is concave in
``theta``, so plain Newton-Raphson with step halving is enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import ExpPHParams, FitResult, PiecewiseParams, TrialData, as_trial
from .exceptions import NonIdentifiable, NotConverged


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 50
    gradient_tolerance: float = 1e-8
    step_halving_max: int = 30
    # A standard error this large means the likelihood is flat in some
    # direction: an estimate drifted off to infinity (monotone likelihood).
    max_std_err: float = 1e3

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.step_halving_max < 0:
            raise ValueError("step_halving_max must be >= 0")


DEFAULT_CONFIG = FitConfig()


def _design(data: TrialData, terms: Sequence[str]) -> np.ndarray:
    return np.column_stack([np.ones(len(data)), data.design(terms)])


def loglik_theta(theta, z, time, event) -> float:
    eta = z @ theta
    return float(event @ eta - time @ np.exp(eta))


def score_theta(theta, z, time, event) -> np.ndarray:
    return z.T @ (event - time * np.exp(z @ theta))


def hessian_theta(theta, z, time, event) -> np.ndarray:
    mu = time * np.exp(z @ theta)
    return -(z.T * mu) @ z


def _arrays(params: ExpPHParams, records):
    data = as_trial(records)
    return (params.theta, _design(data, params.terms), data.time,
            data.event.astype(float))


def loglik_exponential(params: ExpPHParams, records) -> float:
    """Exact censored-data log-likelihood under exponential PH."""
    if not params.lam > 0:
        raise ValueError("lambda must be positive")
    data = as_trial(records)
    z = data.design(params.terms)
    eta = z @ np.asarray(params.beta, dtype=float)
    d = data.event.astype(float)
    return float(d @ (math.log(params.lam) + eta) - params.lam * (data.time @ np.exp(eta)))


def score_exponential(params: ExpPHParams, records) -> np.ndarray:
    """Gradient of the log-likelihood in ``(log lambda, beta)``."""
    return score_theta(*_arrays(params, records))


def hessian_exponential(params: ExpPHParams, records) -> np.ndarray:
    return hessian_theta(*_arrays(params, records))


def _newton(z, time, event, config: FitConfig):
    n_events = event.sum()
    exposure = time.sum()
    theta = np.zeros(z.shape[1])
    theta[0] = math.log(n_events / exposure)
    eta = z @ theta
    ll = float(event @ eta - time @ np.exp(eta))
    for it in range(config.max_iterations + 1):
        mu = time * np.exp(eta)
        grad = z.T @ (event - mu)
        info = (z.T * mu) @ z
        if np.max(np.abs(grad)) < config.gradient_tolerance:
            return theta, info, ll, it
        if it == config.max_iterations:
            break
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError as exc:
            raise NonIdentifiable("singular information matrix") from exc
        scale = 1.0
        for _ in range(config.step_halving_max + 1):
            cand = theta + scale * step
            eta_c = z @ cand
            ll_c = float(event @ eta_c - time @ np.exp(eta_c))
            if ll_c >= ll - 1e-12 * abs(ll):
                break
            scale *= 0.5
        else:
            raise NotConverged("step halving found no ascent")
        theta, eta, ll = cand, eta_c, ll_c
    raise NotConverged(f"gradient still {np.max(np.abs(grad)):.3g} after "
                       f"{config.max_iterations} iterations")


def _fit_block(time, event, x, terms, config: FitConfig):
    if event.sum() == 0:
        raise NonIdentifiable("no events")
    z = np.column_stack([np.ones(len(time)), x])
    if np.linalg.matrix_rank(z) < z.shape[1]:
        raise NonIdentifiable(f"design over {tuple(terms)} is rank deficient")
    theta, info, ll, iterations = _newton(z, time, event, config)
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise NonIdentifiable("singular information matrix") from exc
    cov = 0.5 * (cov + cov.T)
    if not np.all(np.sqrt(np.maximum(np.diag(cov), 0.0)) < config.max_std_err):
        raise NonIdentifiable("estimate diverged (monotone likelihood)")
    return ExpPHParams.from_theta(theta, terms), cov, ll, iterations


def fit_exponential(records, terms: Sequence[str] = (), config: FitConfig = DEFAULT_CONFIG
                    ) -> FitResult:
    """Newton-Raphson fit of an exponential PH model over ``terms``.

    Raises
    ------
    NonIdentifiable
        No events, a rank-deficient design, or a diverging estimate.
    NotConverged
        The gradient did not drop below tolerance within the iteration cap.
    """
    data = as_trial(records)
    params, cov, ll, iterations = _fit_block(data.time, data.event.astype(float),
                                             data.design(terms), tuple(terms), config)
    return FitResult(params, cov, ll, True, iterations)


def split_at_knot(data: TrialData, knot: float) -> tuple[TrialData, TrialData]:
    """Episode split: exposure before the knot, and after it for survivors."""
    pre_time = np.minimum(data.time, knot)
    pre_event = data.event.astype(bool) & (data.time <= knot)
    late = data.time > knot
    pre = TrialData(pre_time, pre_event, data.treatment, data.inherit, data.sex)
    post = TrialData(data.time[late] - knot, data.event[late], data.treatment[late],
                     data.inherit[late], data.sex[late])
    return pre, post


def fit_piecewise(records, terms: Sequence[str], knot: float,
                  config: FitConfig = DEFAULT_CONFIG) -> FitResult:
    """Fit a one-knot piecewise-exponential PH model.

    The parameters of the two pieces are disjoint, so the likelihood factorises
    and each piece is an ordinary exponential fit on its episodes.
    """
    if not knot > 0:
        raise ValueError("knot must be positive")
    terms = tuple(terms)
    pre, post = split_at_knot(as_trial(records), knot)
    blocks = []
    for label, part in (("pre-knot", pre), ("post-knot", post)):
        if len(part) == 0:
            raise NonIdentifiable(f"{label}: no subjects at risk")
        try:
            blocks.append(_fit_block(part.time, part.event.astype(float),
                                     part.design(terms), terms, config))
        except NonIdentifiable as exc:
            raise NonIdentifiable(f"{label}: {exc}") from exc
    (pa, ca, la, ia), (pb, cb, lb, ib) = blocks
    k = len(ca)
    cov = np.zeros((2 * k, 2 * k))
    cov[:k, :k] = ca
    cov[k:, k:] = cb
    return FitResult(PiecewiseParams(knot, pa, pb), cov, la + lb, True, max(ia, ib))
