"""Flat ``key = value`` scenario files and the named presets.

Lines are ``key = value``; ``#`` starts a comment.  Sweep values accept a
comma list or an inclusive ``start:stop:step`` range.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .domain import CovariateVector, ExpPHParams, PiecewiseParams
from .inference import Profile
from .montecarlo import METHODS, Hypothesis, Scenario
from .simulate import TrialDesign, permute_treatment

PRESETS = (
    "cgd-power", "cgd-null", "cgd-beta3-sweep", "cgd-tstar-sweep",
    "crossing-power", "crossing-null", "crossing-tstar-sweep", "crossing-knot-sweep",
    "crossing-permuted",
    # Companions covering the null halves of the sweeps.
    "cgd-beta3-null-sweep", "crossing-null-knot-sweep",
)
AXES = ("none", "t_star", "beta3", "assumed_knot")


class ConfigError(ValueError):
    """A scenario file or override names a bad key or value."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def parse_keyvalue(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", f"expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}", "empty key")
        out[key] = value
    return out


def dump_keyvalue(values: Mapping[str, str]) -> str:
    return "".join(f"{k} = {values[k]}\n" for k in sorted(values))


def load_preset(name: str) -> dict[str, str]:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("rmstsim").joinpath("presets", f"{name}.cfg").read_text()
    values = parse_keyvalue(text, f"preset {name}")
    values["preset"] = name
    return values


def load_file(path) -> dict[str, str]:
    path = Path(path)
    return parse_keyvalue(path.read_text(), str(path))


def parse_values(raw: str) -> list[float]:
    """``"1,10:30:10"`` -> ``[1, 10, 20, 30]``; ranges include their stop."""
    out: list[float] = []
    for item in (p.strip() for p in raw.split(",")):
        if not item:
            continue
        if ":" in item:
            start, stop, step = (float(p) for p in item.split(":"))
            if step <= 0:
                raise ValueError("range step must be positive")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            # Rounding keeps 0.2-step grids free of 0.6000000000000001.
            out.extend(round(start + i * step, 10) for i in range(count))
        else:
            out.append(float(item))
    return out


@dataclass(frozen=True)
class RunConfig:
    values: dict
    scenario: Scenario
    axis: str
    axis_values: tuple[float, ...]
    replication_index: int = 0

    def echo(self) -> str:
        """Resolved settings, defaults included, in a re-loadable form."""
        return dump_keyvalue({**_DEFAULTS, **self.values})


_DEFAULTS = {
    "model": "exponential", "n_subjects": "100", "accrual_window": "20",
    "analysis_time": "120", "censor_rate": "0.001", "covariate_prob": "0.5", "seed": "0",
    "permute_treatment": "false", "t_star": "100", "hypothesis": "alternative",
    "replications": "10000", "alpha": "0.025", "profile": "marginal", "axis": "none",
    "replication_index": "0",
}
_KNOWN_PREFIXES = ("truth.", "profile.")
_KNOWN = {
    "preset", "model", "n_subjects", "accrual_window", "analysis_time", "censor_rate",
    "covariate_prob", "seed", "permute_treatment", "t_star", "methods", "assumed_knot",
    "hypothesis", "replications", "alpha", "profile", "axis", "values",
    "replication_index",
}


def _get(values, key, conv, default=None):
    if key not in values:
        if default is None:
            raise ConfigError(key, "missing")
        return default
    try:
        return conv(values[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"bad value {values[key]!r} ({exc})") from None


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def resolve(values: Mapping[str, str]) -> RunConfig:
    """Validate raw key/values and build the scenario they describe."""
    values = dict(values)
    for key in values:
        if key not in _KNOWN and not key.startswith(_KNOWN_PREFIXES):
            raise ConfigError(key, "unknown key")
    model = _get(values, "model", str, "exponential")
    try:
        if model == "exponential":
            truth = ExpPHParams.from_dict(values, "truth.")
        elif model == "piecewise":
            truth = PiecewiseParams.from_dict(values, "truth.")
        else:
            raise ConfigError("model", f"expected exponential or piecewise, got {model!r}")
    except KeyError as exc:
        raise ConfigError(exc.args[0], "missing") from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("truth", str(exc)) from None

    try:
        design = TrialDesign(
            truth=truth,
            n_subjects=_get(values, "n_subjects", int, 100),
            accrual_window=_get(values, "accrual_window", float, 20.0),
            analysis_time=_get(values, "analysis_time", float, 120.0),
            censor_rate=_get(values, "censor_rate", float, 0.001),
            covariate_prob=_get(values, "covariate_prob", float, 0.5),
            seed=_get(values, "seed", int, 0),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        field = next((k for k in ("n_subjects", "accrual_window", "censor_rate",
                                  "covariate_prob", "seed") if k in str(exc)), "design")
        raise ConfigError(field, str(exc)) from None
    if _get(values, "permute_treatment", _bool, False):
        try:
            design = permute_treatment(design)
        except TypeError as exc:
            raise ConfigError("permute_treatment", str(exc)) from None

    profile_kind = _get(values, "profile", str, "marginal")
    if profile_kind == "marginal":
        profile = Profile(covariate_prob=design.covariate_prob)
    elif profile_kind == "reference":
        try:
            profile = Profile(CovariateVector(0, _get(values, "profile.inherit", int, 0),
                                              _get(values, "profile.sex", int, 0)))
        except ValueError as exc:
            raise ConfigError("profile", str(exc)) from None
    else:
        raise ConfigError("profile", f"expected marginal or reference, got {profile_kind!r}")

    methods = tuple(m.strip() for m in _get(values, "methods", str, "").split(",") if m.strip())
    for m in methods:
        if m not in METHODS:
            raise ConfigError("methods", f"unknown method {m!r}; choose from {METHODS}")
    hypothesis = _get(values, "hypothesis", str, "alternative")
    if hypothesis not in ("alternative", "null"):
        raise ConfigError("hypothesis", f"expected alternative or null, got {hypothesis!r}")
    knot = values.get("assumed_knot")
    try:
        scenario = Scenario(
            design=design,
            t_star=_get(values, "t_star", float, 100.0),
            methods=methods,
            assumed_knot=None if knot in (None, "", "none") else
            _get(values, "assumed_knot", float),
            hypothesis=Hypothesis(hypothesis),
            replications=_get(values, "replications", int, 10_000),
            alpha=_get(values, "alpha", float, 0.025),
            profile=profile,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        msg = str(exc)
        field = next((k for k in ("replications", "methods", "alpha", "t_star", "assumed_knot",
                                  "crossing") if k in msg), "scenario")
        raise ConfigError({"crossing": "methods"}.get(field, field), msg) from None

    axis = _get(values, "axis", str, "none")
    if axis not in AXES:
        raise ConfigError("axis", f"expected one of {AXES}, got {axis!r}")
    axis_values: tuple[float, ...] = ()
    if axis != "none":
        axis_values = tuple(_get(values, "values", parse_values))
        if not axis_values:
            raise ConfigError("values", "empty sweep")
        if axis == "assumed_knot" and "crossing_assumed" not in methods:
            raise ConfigError("axis", "an assumed_knot sweep needs the crossing_assumed method")
        if axis in ("t_star", "assumed_knot") and min(axis_values) <= 0:
            raise ConfigError("values", "sweep values must be positive")
    index = _get(values, "replication_index", int, 0)
    if index < 0:
        raise ConfigError("replication_index", "must be >= 0")
    return RunConfig(values, scenario, axis, axis_values, index)


def build_config(preset: Optional[str] = None, path=None,
                 overrides: Optional[Mapping[str, str]] = None) -> RunConfig:
    values: dict[str, str] = {}
    if preset:
        values.update(load_preset(preset))
    if path:
        values.update(load_file(path))
    if not values:
        raise ConfigError("preset", "give --preset or --config")
    values.update(overrides or {})
    return resolve(values)
