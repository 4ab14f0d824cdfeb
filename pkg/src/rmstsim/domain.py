"""Core value types: covariates, subject records, model parameters, fits.

Covariate coding follows the cgd trial: treatment (control=0, interferon=1),
inherit (X-linked=0, autosomal=1) and sex (male=0, female=1).  The
treatment x inherit interaction is always derived, never stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

TERMS = ("treatment", "inherit", "sex", "interaction")
FULL_TERMS = TERMS
MISSPEC_TERMS = ("treatment", "inherit", "interaction")


def _check_terms(terms: Sequence[str]) -> tuple[str, ...]:
    terms = tuple(terms)
    unknown = [t for t in terms if t not in TERMS]
    if unknown:
        raise ValueError(f"unknown model terms: {unknown}")
    if len(set(terms)) != len(terms):
        raise ValueError(f"duplicate model terms: {terms}")
    return terms


def _check_bit(name: str, value) -> int:
    if value not in (0, 1):
        raise ValueError(f"{name} must be 0 or 1, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class CovariateVector:
    treatment: int = 0
    inherit: int = 0
    sex: int = 0

    def __post_init__(self):
        for name in ("treatment", "inherit", "sex"):
            object.__setattr__(self, name, _check_bit(name, getattr(self, name)))

    @property
    def interaction(self) -> int:
        return self.treatment * self.inherit

    def term(self, name: str) -> int:
        return getattr(self, name)

    def with_treatment(self, treatment: int) -> "CovariateVector":
        return replace(self, treatment=treatment)


@dataclass(frozen=True)
class SubjectRecord:
    time: float
    event: int
    covariates: CovariateVector = field(default_factory=CovariateVector)

    def __post_init__(self):
        if not (self.time >= 0 and math.isfinite(self.time)):
            raise ValueError(f"time must be finite and >= 0, got {self.time!r}")
        object.__setattr__(self, "event", _check_bit("event", self.event))


@dataclass(frozen=True)
class ExpPHParams:
    """Exponential proportional-hazards parameters.

    ``beta`` is ordered like ``terms``; a term absent from ``terms`` simply
    contributes nothing to the linear predictor.
    """

    lam: float
    beta: tuple[float, ...] = ()
    terms: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", _check_terms(self.terms))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "lam", float(self.lam))
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be positive and finite, got {self.lam!r}")
        if len(self.beta) != len(self.terms):
            raise ValueError(
                f"beta has {len(self.beta)} entries but {len(self.terms)} terms declared"
            )
        if not all(math.isfinite(b) for b in self.beta):
            raise ValueError("beta must be finite")

    @classmethod
    def from_coefficients(cls, lam: float, coefficients: Mapping[str, float],
                          terms: Sequence[str] | None = None) -> "ExpPHParams":
        terms = tuple(coefficients) if terms is None else tuple(terms)
        return cls(lam, tuple(coefficients.get(t, 0.0) for t in terms), terms)

    def coef(self, term: str) -> float:
        """Coefficient of ``term``, zero when the term is not in the model."""
        try:
            return self.beta[self.terms.index(term)]
        except ValueError:
            return 0.0

    def with_coef(self, **values: float) -> "ExpPHParams":
        beta = list(self.beta)
        for name, value in values.items():
            if name not in self.terms:
                raise KeyError(f"term {name!r} not in model {self.terms}")
            beta[self.terms.index(name)] = value
        return replace(self, beta=tuple(beta))

    @property
    def theta(self) -> np.ndarray:
        """Unconstrained parameter vector ``(log lambda, beta...)``."""
        return np.array((math.log(self.lam),) + self.beta)

    @classmethod
    def from_theta(cls, theta, terms: Sequence[str]) -> "ExpPHParams":
        theta = np.asarray(theta, dtype=float)
        return cls(math.exp(theta[0]), tuple(theta[1:]), tuple(terms))

    def to_dict(self, prefix: str = "") -> dict[str, str]:
        out = {f"{prefix}lambda": repr(self.lam),
               f"{prefix}terms": ",".join(self.terms)}
        for t, b in zip(self.terms, self.beta):
            out[f"{prefix}beta.{t}"] = repr(b)
        return out

    @classmethod
    def from_dict(cls, values: Mapping[str, str], prefix: str = "") -> "ExpPHParams":
        raw = values.get(f"{prefix}terms")
        if raw is None:
            terms = tuple(t for t in TERMS if f"{prefix}beta.{t}" in values)
        else:
            terms = tuple(t.strip() for t in raw.split(",") if t.strip())
        beta = tuple(float(values.get(f"{prefix}beta.{t}", "0")) for t in terms)
        return cls(float(values[f"{prefix}lambda"]), beta, terms)


@dataclass(frozen=True)
class PiecewiseParams:
    """Two-piece exponential PH model with a single knot."""

    knot: float
    before: ExpPHParams
    after: ExpPHParams

    def __post_init__(self):
        object.__setattr__(self, "knot", float(self.knot))
        if not (self.knot > 0 and math.isfinite(self.knot)):
            raise ValueError(f"knot must be positive, got {self.knot!r}")
        if self.before.terms != self.after.terms:
            raise ValueError("both pieces must declare the same terms")

    @property
    def terms(self) -> tuple[str, ...]:
        return self.before.terms

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.before.theta, self.after.theta])

    @classmethod
    def from_theta(cls, theta, terms: Sequence[str], knot: float) -> "PiecewiseParams":
        theta = np.asarray(theta, dtype=float)
        k = len(terms) + 1
        return cls(knot, ExpPHParams.from_theta(theta[:k], terms),
                   ExpPHParams.from_theta(theta[k:], terms))

    def to_dict(self, prefix: str = "") -> dict[str, str]:
        out = {f"{prefix}knot": repr(self.knot)}
        out.update(self.before.to_dict(f"{prefix}before."))
        out.update(self.after.to_dict(f"{prefix}after."))
        return out

    @classmethod
    def from_dict(cls, values: Mapping[str, str], prefix: str = "") -> "PiecewiseParams":
        return cls(float(values[f"{prefix}knot"]),
                   ExpPHParams.from_dict(values, f"{prefix}before."),
                   ExpPHParams.from_dict(values, f"{prefix}after."))


Params = Union[ExpPHParams, PiecewiseParams]


@dataclass(frozen=True)
class FitResult:
    """Maximum-likelihood fit.

    ``covariance`` is the inverse observed information on the
    ``(log lambda, beta)`` scale; for piecewise fits it is block diagonal with
    the pre-knot block first.
    """

    params: Params
    covariance: np.ndarray
    loglik: float
    converged: bool
    iterations: int

    @property
    def covariance_natural(self) -> np.ndarray:
        """Covariance on the ``(lambda, beta)`` scale via the delta rule."""
        jac = np.ones(len(self.covariance))
        if isinstance(self.params, PiecewiseParams):
            k = len(self.params.terms) + 1
            jac[0] = self.params.before.lam
            jac[k] = self.params.after.lam
        else:
            jac[0] = self.params.lam
        return self.covariance * np.outer(jac, jac)


def linear_predictor(params: ExpPHParams, x: CovariateVector) -> float:
    """``beta' x`` over the terms declared on ``params``."""
    return math.fsum(b * x.term(t) for t, b in zip(params.terms, params.beta))


@dataclass(frozen=True, eq=False)
class TrialData:
    """Column-oriented trial dataset; iterates as :class:`SubjectRecord`."""

    time: np.ndarray
    event: np.ndarray
    treatment: np.ndarray
    inherit: np.ndarray
    sex: np.ndarray

    def __post_init__(self):
        for name in ("time", "event", "treatment", "inherit", "sex"):
            arr = np.asarray(getattr(self, name), dtype=float if name == "time" else np.int8)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = len(self.time)
        if any(len(getattr(self, f)) != n for f in ("event", "treatment", "inherit", "sex")):
            raise ValueError("all columns must have equal length")

    def __len__(self) -> int:
        return len(self.time)

    def __iter__(self) -> Iterator[SubjectRecord]:
        for i in range(len(self)):
            yield SubjectRecord(float(self.time[i]), int(self.event[i]),
                                CovariateVector(int(self.treatment[i]), int(self.inherit[i]),
                                                int(self.sex[i])))

    @classmethod
    def from_records(cls, records: Iterable[SubjectRecord]) -> "TrialData":
        records = list(records)
        return cls(
            time=[r.time for r in records],
            event=[r.event for r in records],
            treatment=[r.covariates.treatment for r in records],
            inherit=[r.covariates.inherit for r in records],
            sex=[r.covariates.sex for r in records],
        )

    def design(self, terms: Sequence[str]) -> np.ndarray:
        """Columns of the named terms, shape ``(n, len(terms))``."""
        cols = []
        for t in terms:
            if t == "interaction":
                cols.append(self.treatment * self.inherit)
            else:
                cols.append(getattr(self, t))
        return np.column_stack(cols).astype(float) if cols else np.empty((len(self), 0))

    def subset(self, mask) -> "TrialData":
        mask = np.asarray(mask)
        return TrialData(self.time[mask], self.event[mask], self.treatment[mask],
                         self.inherit[mask], self.sex[mask])

    def swap_arms(self) -> "TrialData":
        return replace(self, treatment=1 - self.treatment)


def as_trial(records) -> TrialData:
    if isinstance(records, TrialData):
        return records
    return TrialData.from_records(records)
