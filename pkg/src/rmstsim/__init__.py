"""Restricted mean survival time: parametric and Kaplan-Meier estimators,
delta-method tests and a Monte Carlo trial simulator."""

__version__ = "0.1.0"

from .domain import (FULL_TERMS, MISSPEC_TERMS, TERMS, CovariateVector, ExpPHParams,
                     FitResult, PiecewiseParams, SubjectRecord, TrialData)
from .exceptions import NonEvaluable, NonIdentifiable, NotConverged, RMSTError
from .inference import (MARGINAL, Method, Profile, RmstDifference, delta_crossing, delta_full,
                        delta_misspec, delta_nonparametric, z_test)
from .kaplan_meier import KMCurve, km_fit, km_rmst, km_rmst_var
from .mle import FitConfig, fit_exponential, fit_piecewise
from .models import rmst, rmst_exponential, rmst_piecewise, survival
from .montecarlo import Hypothesis, MonteCarloReport, Scenario, run_scenario, sweep
from .simulate import (CGD_TRUTH, CROSSING_TRUTH, TrialDesign, generate_trial, null_design,
                       permute_treatment)
from .estimators import (ExponentialPHRegressor, PiecewiseExponentialPHRegressor,
                         RMSTDifferenceTest)

__all__ = [
    "TERMS", "FULL_TERMS", "MISSPEC_TERMS", "CovariateVector", "SubjectRecord", "ExpPHParams",
    "PiecewiseParams", "FitResult", "TrialData",
    "RMSTError", "NonIdentifiable", "NotConverged", "NonEvaluable",
    "rmst", "rmst_exponential", "rmst_piecewise", "survival",
    "KMCurve", "km_fit", "km_rmst", "km_rmst_var",
    "FitConfig", "fit_exponential", "fit_piecewise",
    "Method", "Profile", "MARGINAL", "RmstDifference", "delta_nonparametric", "delta_full",
    "delta_misspec", "delta_crossing", "z_test",
    "TrialDesign", "CGD_TRUTH", "CROSSING_TRUTH", "generate_trial", "null_design",
    "permute_treatment",
    "Scenario", "Hypothesis", "MonteCarloReport", "run_scenario", "sweep",
    "ExponentialPHRegressor", "PiecewiseExponentialPHRegressor", "RMSTDifferenceTest",
]
