"""Randomised-trial generation: covariates, event times, censoring, accrual."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .domain import ExpPHParams, Params, PiecewiseParams, TrialData
from .models import rates, sample_from_rates, sample_piecewise_from_rates

CGD_TRUTH = ExpPHParams(
    0.015777,
    (-1.116749, 0.094373, -0.402188, 0.475445),
    ("treatment", "inherit", "sex", "interaction"),
)
CROSSING_TRUTH = PiecewiseParams(
    40.0,
    ExpPHParams(0.0158, (-1.117, 0.094, -0.402, 0.475),
                ("treatment", "inherit", "sex", "interaction")),
    ExpPHParams(0.0158, (0.750, 0.094, -0.402, 0.475),
                ("treatment", "inherit", "sex", "interaction")),
)

# Columns of the per-subject uniform block, in draw order.
_N_DRAWS = 6


@dataclass(frozen=True)
class TrialDesign:
    truth: Params = CGD_TRUTH
    n_subjects: int = 100
    accrual_window: float = 20.0
    analysis_time: float = 120.0
    censor_rate: float = 0.001
    covariate_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if int(self.n_subjects) != self.n_subjects or self.n_subjects < 1:
            raise ValueError(f"n_subjects must be a positive integer, got {self.n_subjects!r}")
        if not 0 < self.accrual_window < self.analysis_time:
            raise ValueError("need 0 < accrual_window < analysis_time, got "
                             f"{self.accrual_window!r} and {self.analysis_time!r}")
        if not (self.censor_rate >= 0 and math.isfinite(self.censor_rate)):
            raise ValueError(f"censor_rate must be >= 0, got {self.censor_rate!r}")
        if not 0 <= self.covariate_prob <= 1:
            raise ValueError(f"covariate_prob must lie in [0, 1], got {self.covariate_prob!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    @property
    def is_piecewise(self) -> bool:
        return isinstance(self.truth, PiecewiseParams)


class LatentTrial(NamedTuple):
    """Everything drawn for one replication before censoring is applied."""

    treatment: np.ndarray
    inherit: np.ndarray
    sex: np.ndarray
    event_time: np.ndarray
    censor_time: np.ndarray
    arrival: np.ndarray


def replication_rng(seed: int, replication_index: int) -> np.random.Generator:
    """Independent counter-based stream for one replication."""
    ss = np.random.SeedSequence(seed, spawn_key=(replication_index,))
    return np.random.Generator(np.random.Philox(ss))


def _open_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    # random() is k / 2**53 on [0, 1); only k = 0 needs moving inside.
    u = rng.random(shape)
    u[u == 0.0] = 2.0**-54
    return u


def _event_times(truth: Params, data: TrialData, u: np.ndarray) -> np.ndarray:
    if isinstance(truth, PiecewiseParams):
        return sample_piecewise_from_rates(u, rates(truth.before, data),
                                           rates(truth.after, data), truth.knot)
    return sample_from_rates(u, rates(truth, data))


def generate_latent(design: TrialDesign, replication_index: int) -> LatentTrial:
    rng = replication_rng(design.seed, replication_index)
    u = _open_uniform(rng, (design.n_subjects, _N_DRAWS))
    p = design.covariate_prob
    treatment = (u[:, 0] < p).astype(np.int8)
    inherit = (u[:, 1] < p).astype(np.int8)
    sex = (u[:, 2] < p).astype(np.int8)
    covs = TrialData(np.zeros(design.n_subjects), np.zeros(design.n_subjects),
                     treatment, inherit, sex)
    event_time = _event_times(design.truth, covs, u[:, 3])
    if design.censor_rate > 0:
        censor_time = -np.log(u[:, 4]) / design.censor_rate
    else:
        censor_time = np.full(design.n_subjects, np.inf)
    arrival = design.accrual_window * u[:, 5]
    return LatentTrial(treatment, inherit, sex, event_time, censor_time, arrival)


def generate_trial(design: TrialDesign, replication_index: int) -> TrialData:
    """One simulated trial, deterministic in ``(design.seed, replication_index)``.

    Follow-up ends at the first of the event, random censoring, or the
    analysis date; an event exactly at the cutoff counts as observed.
    """
    lat = generate_latent(design, replication_index)
    limit = design.analysis_time - lat.arrival
    cutoff = np.minimum(lat.censor_time, limit)
    event = lat.event_time <= cutoff
    time = np.where(event, lat.event_time, cutoff)
    return TrialData(time, event, lat.treatment, lat.inherit, lat.sex)


def _zero_treatment(params: ExpPHParams) -> ExpPHParams:
    values = {t: 0.0 for t in ("treatment", "interaction") if t in params.terms}
    return params.with_coef(**values)


def null_design(design: TrialDesign) -> TrialDesign:
    """Copy of ``design`` with the treatment and interaction effects removed."""
    truth = design.truth
    if isinstance(truth, PiecewiseParams):
        truth = replace(truth, before=_zero_treatment(truth.before),
                        after=_zero_treatment(truth.after))
    else:
        truth = _zero_treatment(truth)
    return replace(design, truth=truth)


def _relabel_arms(params: ExpPHParams) -> ExpPHParams:
    # Substituting treatment -> 1 - treatment in the linear predictor moves the
    # main effect into the baseline and the interaction into inherit.
    b1 = params.coef("treatment")
    b12 = params.coef("interaction")
    values = {}
    if "treatment" in params.terms:
        values["treatment"] = -b1
    if "interaction" in params.terms:
        values["interaction"] = -b12
        if "inherit" not in params.terms and b12 != 0:
            raise ValueError("relabelling an interaction needs an inherit term")
    if "inherit" in params.terms:
        values["inherit"] = params.coef("inherit") + b12
    return replace(params.with_coef(**values), lam=params.lam * math.exp(b1))


def permute_treatment(design: TrialDesign) -> TrialDesign:
    """Swap the arm labels of a crossing-curves truth."""
    truth = design.truth
    if not isinstance(truth, PiecewiseParams):
        raise TypeError("permute_treatment needs a piecewise (crossing) truth")
    truth = replace(truth, before=_relabel_arms(truth.before), after=_relabel_arms(truth.after))
    return replace(design, truth=truth)


def write_trial_csv(path, data: TrialData) -> None:
    lines = ["time,event,treatment,inherit,sex"]
    for i in range(len(data)):
        lines.append(f"{data.time[i]:.6f},{data.event[i]},{data.treatment[i]},"
                     f"{data.inherit[i]},{data.sex[i]}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_trial_csv(path) -> TrialData:
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return TrialData(raw[:, 0], raw[:, 1], raw[:, 2], raw[:, 3], raw[:, 4])
