"""Replication engine for power and type-I error of the RMST estimators.

Work is cut into fixed-size chunks of consecutive replication indices.  A
chunk is computed identically whichever process runs it, and chunks are
reduced in index order, so reports do not depend on the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from .domain import FULL_TERMS, MISSPEC_TERMS, PiecewiseParams
from .exceptions import NonEvaluable, RMSTError
from .inference import (MARGINAL, Profile, critical_value, delta_crossing, delta_full,
                        delta_misspec)
from .kaplan_meier import km_fit_arrays, km_rmst, km_rmst_var
from .mle import fit_exponential, fit_piecewise
from .simulate import TrialDesign, generate_trial, null_design

CHUNK_SIZE = 250
Z_SAMPLE_CAP = 100_000

NONPARAMETRIC = "nonparametric"
FULL = "full"
MISSPEC = "misspec"
CROSSING = "crossing"
CROSSING_ASSUMED = "crossing_assumed"
METHODS = (NONPARAMETRIC, FULL, MISSPEC, CROSSING, CROSSING_ASSUMED)

_OK, _EXCL_KM, _EXCL_FIT = 0, 1, 2


class Hypothesis(str, Enum):
    ALTERNATIVE = "alternative"
    NULL = "null"


@dataclass(frozen=True)
class Scenario:
    """One experimental condition.

    ``crossing`` fits the knot model at the true knot; ``crossing_assumed``
    fits it at ``assumed_knot``.  ``t_star`` may be a sequence, in which case
    every replication is analysed at each horizon (see :func:`sweep`).
    """

    design: TrialDesign = TrialDesign()
    t_star: float = 100.0
    methods: tuple[str, ...] = (NONPARAMETRIC, FULL, MISSPEC)
    assumed_knot: Optional[float] = None
    hypothesis: Hypothesis = Hypothesis.ALTERNATIVE
    replications: int = 10_000
    alpha: float = 0.025
    profile: Profile = MARGINAL

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "hypothesis", Hypothesis(self.hypothesis))
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.t_star > 0:
            raise ValueError("t_star must be positive")
        needs_knot_truth = {CROSSING} & set(self.methods)
        if needs_knot_truth and not self.design.is_piecewise:
            raise ValueError("the crossing method needs a piecewise truth")
        if CROSSING_ASSUMED in self.methods:
            if self.assumed_knot is None or not self.assumed_knot > 0:
                raise ValueError("crossing_assumed needs a positive assumed_knot")

    @property
    def effective_design(self) -> TrialDesign:
        if self.hypothesis is Hypothesis.NULL:
            return null_design(self.design)
        return self.design


@dataclass
class MethodSummary:
    method: str
    replications: int
    rejections: int
    evaluable: int
    excluded_km: int
    excluded_fit: int
    mean_delta: float
    mean_se: float
    z_sample: np.ndarray = field(repr=False)

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.evaluable if self.evaluable else math.nan

    @property
    def mc_stderr(self) -> float:
        p = self.rejection_rate
        return math.sqrt(p * (1 - p) / self.evaluable) if self.evaluable else math.nan

    @property
    def excluded(self) -> int:
        return self.excluded_km + self.excluded_fit


@dataclass
class MonteCarloReport:
    axis: str
    axis_value: float
    hypothesis: Hypothesis
    replications: int
    methods: dict[str, MethodSummary]
    # Replications missing at least one treatment x inherit x sex combination.
    missing_cells: int = 0

    def __getitem__(self, method: str) -> MethodSummary:
        return self.methods[method]


# Per-replication work ----------------------------------------------------------

@dataclass(frozen=True)
class _Plan:
    """Everything a worker needs: the design and the (t_star, knot) grid."""

    design: TrialDesign
    methods: tuple[str, ...]
    points: tuple[tuple[float, Optional[float]], ...]
    profile: Profile
    critical: float


def _missing_cells(data) -> bool:
    codes = data.treatment * 4 + data.inherit * 2 + data.sex
    return np.unique(codes).size < 8


def _analyse(plan: _Plan, data, status, delta, se):
    """Fill one replication's rows of the result arrays in place."""
    fits: dict = {}
    diffs: dict = {}
    curves = None

    def fit(key):
        if key not in fits:
            try:
                if key[0] == "exp":
                    fits[key] = fit_exponential(data, key[1])
                else:
                    fits[key] = fit_piecewise(data, FULL_TERMS, key[1])
            except RMSTError as exc:
                fits[key] = exc
        return fits[key]

    truth = plan.design.truth
    for p, (t_star, knot) in enumerate(plan.points):
        for m, method in enumerate(plan.methods):
            if method == NONPARAMETRIC:
                if curves is None:
                    treated = data.treatment == 1
                    if treated.all() or not treated.any():
                        curves = NonEvaluable("one arm is empty")
                    else:
                        curves = (km_fit_arrays(data.time[treated], data.event[treated]),
                                  km_fit_arrays(data.time[~treated], data.event[~treated]))
                if isinstance(curves, Exception) or not (
                        curves[0].evaluable(t_star) and curves[1].evaluable(t_star)):
                    status[p, m] = _EXCL_KM
                    continue
                d = km_rmst(curves[0], t_star) - km_rmst(curves[1], t_star)
                v = km_rmst_var(curves[0], t_star) + km_rmst_var(curves[1], t_star)
                s = math.sqrt(v)
                if not s > 0:
                    status[p, m] = _EXCL_KM
                    continue
            else:
                if method == FULL:
                    res = fit(("exp", FULL_TERMS))
                elif method == MISSPEC:
                    res = fit(("exp", MISSPEC_TERMS))
                elif method == CROSSING:
                    res = fit(("pw", truth.knot))
                else:
                    res = fit(("pw", knot))
                if isinstance(res, Exception):
                    status[p, m] = _EXCL_FIT
                    continue
                # Fits are shared (the true-knot fit along a knot sweep, say),
                # so each (fit, horizon) pair is analysed once.
                memo = (id(res), t_star)
                diff = diffs.get(memo)
                if diff is None:
                    if method == FULL:
                        diff = delta_full(res, t_star, plan.profile)
                    elif method == MISSPEC:
                        diff = delta_misspec(res, t_star, plan.profile)
                    else:
                        diff = delta_crossing(res, t_star, plan.profile)
                    diffs[memo] = diff
                d, s = diff.delta_hat, diff.std_err
                if not s > 0:
                    status[p, m] = _EXCL_FIT
                    continue
            status[p, m] = _OK
            delta[p, m] = d
            se[p, m] = s


def _run_chunk(plan: _Plan, start: int, stop: int):
    r = stop - start
    shape = (r, len(plan.points), len(plan.methods))
    status = np.zeros(shape, dtype=np.int8)
    delta = np.full(shape, np.nan)
    se = np.full(shape, np.nan)
    missing = np.zeros(r, dtype=bool)
    for i, k in enumerate(range(start, stop)):
        data = generate_trial(plan.design, k)
        missing[i] = _missing_cells(data)
        _analyse(plan, data, status[i], delta[i], se[i])
    return status, delta, se, missing


def _chunks(n: int):
    return [(s, min(s + CHUNK_SIZE, n)) for s in range(0, n, CHUNK_SIZE)]


def default_workers() -> int:
    return os.cpu_count() or 1


def _execute(plan: _Plan, replications: int, workers: Optional[int]):
    chunks = _chunks(replications)
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(chunks) == 1:
        parts = [_run_chunk(plan, a, b) for a, b in chunks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
            parts = list(pool.map(_run_chunk, [plan] * len(chunks),
                                  [a for a, _ in chunks], [b for _, b in chunks]))
    return tuple(np.concatenate(x) for x in zip(*parts))


def _summarise(method, status, delta, se, critical, replications) -> MethodSummary:
    ok = status == _OK
    z = delta[ok] / se[ok]
    return MethodSummary(
        method=method,
        replications=replications,
        rejections=int(np.count_nonzero(z > critical)),
        evaluable=int(ok.sum()),
        excluded_km=int(np.count_nonzero(status == _EXCL_KM)),
        excluded_fit=int(np.count_nonzero(status == _EXCL_FIT)),
        mean_delta=math.fsum(delta[ok]) / ok.sum() if ok.any() else math.nan,
        mean_se=math.fsum(se[ok]) / ok.sum() if ok.any() else math.nan,
        z_sample=z[:Z_SAMPLE_CAP].copy(),
    )


def _run_points(scenario: Scenario, points, axis: str, axis_values, workers):
    plan = _Plan(scenario.effective_design, scenario.methods, tuple(points),
                 scenario.profile, critical_value(scenario.alpha))
    status, delta, se, missing = _execute(plan, scenario.replications, workers)
    reports = []
    for p, value in enumerate(axis_values):
        methods = {m: _summarise(m, status[:, p, j], delta[:, p, j], se[:, p, j],
                                 plan.critical, scenario.replications)
                   for j, m in enumerate(scenario.methods)}
        reports.append(MonteCarloReport(axis, float(value), scenario.hypothesis,
                                        scenario.replications, methods,
                                        int(missing.sum())))
    return reports


def run_scenario(scenario: Scenario, workers: Optional[int] = None) -> MonteCarloReport:
    """Power (alternative) or type-I error (null) of each requested method."""
    points = [(scenario.t_star, scenario.assumed_knot)]
    return _run_points(scenario, points, "t_star", [scenario.t_star], workers)[0]


def with_beta3(design: TrialDesign, value: float) -> TrialDesign:
    truth = design.truth
    if isinstance(truth, PiecewiseParams):
        truth = replace(truth, before=truth.before.with_coef(sex=value),
                        after=truth.after.with_coef(sex=value))
    else:
        truth = truth.with_coef(sex=value)
    return replace(design, truth=truth)


def sweep(base: Scenario, axis: str, values: Sequence[float],
          workers: Optional[int] = None) -> list[MonteCarloReport]:
    """One report per axis value, all built from the same replication streams.

    Horizon and knot sweeps reuse each simulated trial for every value; a
    ``beta3`` sweep regenerates trials from identical random numbers.
    """
    values = [float(v) for v in values]
    if not values:
        raise ValueError("sweep needs at least one value")
    if axis == "t_star":
        points = [(v, base.assumed_knot) for v in values]
        return _run_points(base, points, axis, values, workers)
    if axis == "assumed_knot":
        if CROSSING_ASSUMED not in base.methods:
            raise ValueError("an assumed_knot sweep needs the crossing_assumed method")
        points = [(base.t_star, v) for v in values]
        return _run_points(base, points, axis, values, workers)
    if axis == "beta3":
        out = []
        for v in values:
            scen = replace(base, design=with_beta3(base.design, v))
            rep = _run_points(scen, [(base.t_star, base.assumed_knot)], axis, [v], workers)
            out.extend(rep)
        return out
    raise ValueError(f"unknown sweep axis {axis!r}")


# Diagnostics and output ------------------------------------------------------------

HIST_EDGES = np.linspace(-5.0, 5.0, 41)


@dataclass
class ZDiagnostics:
    edges: np.ndarray
    counts: np.ndarray
    underflow: int
    overflow: int
    theoretical: np.ndarray
    empirical: np.ndarray

    def qq_slope(self) -> float:
        return float(np.polyfit(self.theoretical, self.empirical, 1)[0])


def z_diagnostics(summary: MethodSummary | np.ndarray) -> ZDiagnostics:
    """Histogram on fixed 0.25-wide bins over [-5, 5] and normal Q-Q pairs."""
    z = summary.z_sample if isinstance(summary, MethodSummary) else np.asarray(summary)
    if z.size == 0:
        raise ValueError("empty z sample")
    inside = (z >= HIST_EDGES[0]) & (z <= HIST_EDGES[-1])
    counts, _ = np.histogram(z[inside], bins=HIST_EDGES)
    m = z.size
    theoretical = norm.ppf(np.arange(1, m + 1) / (m + 1))
    return ZDiagnostics(HIST_EDGES.copy(), counts, int(np.sum(z < HIST_EDGES[0])),
                        int(np.sum(z > HIST_EDGES[-1])), theoretical, np.sort(z))


REPORT_COLUMNS = ("axis_value,method,hypothesis,replications,evaluable,excluded_km,"
                  "excluded_fit,rejections,rate,mc_stderr,mean_delta,mean_se")


def _g(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6g}"


def report_rows(reports: Sequence[MonteCarloReport]) -> list[str]:
    rows = [REPORT_COLUMNS]
    for rep in reports:
        for s in rep.methods.values():
            rate = "nan" if math.isnan(s.rejection_rate) else f"{s.rejection_rate:.6f}"
            rows.append(",".join([
                _g(rep.axis_value), s.method, rep.hypothesis.value, str(s.replications),
                str(s.evaluable), str(s.excluded_km), str(s.excluded_fit),
                str(s.rejections), rate, _g(s.mc_stderr), _g(s.mean_delta), _g(s.mean_se),
            ]))
    return rows


def write_report_csv(path, reports: Sequence[MonteCarloReport]) -> None:
    Path(path).write_text("\n".join(report_rows(reports)) + "\n")


def write_z_csv(directory, reports: Sequence[MonteCarloReport]) -> None:
    hist = ["axis_value,method,bin_lo,bin_hi,count"]
    qq = ["axis_value,method,theoretical,empirical"]
    for rep in reports:
        for s in rep.methods.values():
            if s.z_sample.size == 0:
                continue
            diag = z_diagnostics(s)
            av = _g(rep.axis_value)
            hist.append(f"{av},{s.method},-inf,{_g(diag.edges[0])},{diag.underflow}")
            for lo, hi, c in zip(diag.edges[:-1], diag.edges[1:], diag.counts):
                hist.append(f"{av},{s.method},{_g(lo)},{_g(hi)},{c}")
            hist.append(f"{av},{s.method},{_g(diag.edges[-1])},inf,{diag.overflow}")
            qq.extend(f"{av},{s.method},{_g(a)},{_g(b)}"
                      for a, b in zip(diag.theoretical, diag.empirical))
    directory = Path(directory)
    (directory / "z_hist.csv").write_text("\n".join(hist) + "\n")
    (directory / "z_qq.csv").write_text("\n".join(qq) + "\n")
