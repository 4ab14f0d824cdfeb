"""Kaplan-Meier curves, restricted mean survival and its Greenwood variance."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import as_trial
from .exceptions import NonEvaluable


@dataclass(frozen=True, eq=False)
class KMCurve:
    """Product-limit estimate stored at the distinct event times.

    ``last_time`` is the largest observed follow-up (event or censoring),
    which bounds the horizons at which the curve may be integrated.
    """

    times: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray
    survival: np.ndarray
    last_time: float

    def __call__(self, t):
        """Right-continuous step function ``S(t)``."""
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right")
        return np.concatenate([[1.0], self.survival])[idx]

    def evaluable(self, t_star: float) -> bool:
        return self.last_time >= t_star


def km_fit_arrays(time, event) -> KMCurve:
    time = np.asarray(time, dtype=float)
    event = np.asarray(event).astype(bool)
    if time.size == 0:
        raise ValueError("Kaplan-Meier needs at least one observation")
    order = np.sort(time)
    ev_times, d = np.unique(time[event], return_counts=True)
    # Everyone with follow-up >= t is at risk at t, so censorings tied with an
    # event still count in the risk set.
    n = time.size - np.searchsorted(order, ev_times, side="left")
    surv = np.cumprod(1.0 - d / n)
    return KMCurve(ev_times, n, d, surv, float(order[-1]))


def km_fit(records) -> KMCurve:
    """Fit a Kaplan-Meier curve to one arm's records."""
    data = as_trial(records)
    return km_fit_arrays(data.time, data.event)


def _areas(curve: KMCurve, t_star: float) -> tuple[np.ndarray, np.ndarray]:
    """Rectangle areas over ``[0, t_star]`` split at each event time <= t_star.

    The first rectangle sits at height 1; rectangle ``i + 1`` starts at the
    ``i``-th event time.  Returns ``(areas, index of included event times)``.
    """
    if not curve.evaluable(t_star):
        raise NonEvaluable(f"t_star={t_star} beyond last observed time {curve.last_time}")
    k = np.searchsorted(curve.times, t_star, side="right")
    edges = np.concatenate([[0.0], curve.times[:k], [t_star]])
    heights = np.concatenate([[1.0], curve.survival[:k]])
    return np.diff(edges) * heights, k


def km_rmst(curve: KMCurve, t_star: float) -> float:
    """Area under the Kaplan-Meier step function on ``[0, t_star]``."""
    areas, _ = _areas(curve, t_star)
    return float(areas.sum())


def km_rmst_var(curve: KMCurve, t_star: float) -> float:
    """Greenwood plug-in variance of :func:`km_rmst`.

    Each event time contributes the squared area remaining to its right times
    ``d / (n (n - d))``; times where the whole risk set fails are skipped.
    """
    areas, k = _areas(curve, t_star)
    if k == 0:
        return 0.0
    n = curve.at_risk[:k].astype(float)
    d = curve.events[:k].astype(float)
    remaining = np.cumsum(areas[1:][::-1])[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(n > d, d / (n * (n - d)), 0.0)
    return float(np.sum(remaining**2 * w))


def km_evaluable(arm1: KMCurve, arm2: KMCurve, t_star: float) -> bool:
    return arm1.evaluable(t_star) and arm2.evaluable(t_star)


def write_km_csv(path, curve: KMCurve) -> None:
    lines = ["time,survival,at_risk,events"]
    for t, s, n, d in zip(curve.times, curve.survival, curve.at_risk, curve.events):
        lines.append(f"{t:.6g},{s:.6g},{n},{d}")
    Path(path).write_text("\n".join(lines) + "\n")
