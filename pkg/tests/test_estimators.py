import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from rmstsim.domain import FULL_TERMS, CovariateVector
from rmstsim.estimators import (ExponentialPHRegressor, PiecewiseExponentialPHRegressor,
                                RMSTDifferenceTest)
from rmstsim.inference import delta_full
from rmstsim.mle import fit_exponential, fit_piecewise
from rmstsim.models import rmst_exponential, rmst_piecewise
from rmstsim.simulate import generate_trial


def xy(data):
    return (np.column_stack([data.treatment, data.inherit, data.sex]),
            np.column_stack([data.time, data.event]))


def test_exponential_regressor(cgd_trial):
    X, y = xy(cgd_trial)
    est = ExponentialPHRegressor(t_star=80.0).fit(X, y)
    ref = fit_exponential(cgd_trial, FULL_TERMS)
    np.testing.assert_allclose(est.params_.theta, ref.params.theta)
    pred = est.predict(X[:4])
    for row, value in zip(X[:4], pred):
        x = CovariateVector(*map(int, row))
        assert value == pytest.approx(rmst_exponential(80.0, ref.params, x))
    assert est.predict_survival(X[:1], 0.0)[0] == 1.0


def test_piecewise_regressor(crossing_design):
    data = generate_trial(crossing_design, 0)
    X, y = xy(data)
    est = PiecewiseExponentialPHRegressor(knot=40.0, t_star=70.0).fit(X, y)
    ref = fit_piecewise(data, FULL_TERMS, 40.0)
    x = CovariateVector(*map(int, X[0]))
    assert est.predict(X[:1])[0] == pytest.approx(rmst_piecewise(70.0, ref.params, x))


def test_params_and_clone():
    est = RMSTDifferenceTest(method="crossing", knot=35.0)
    assert est.get_params()["knot"] == 35.0
    assert clone(est).get_params() == est.get_params()
    est.set_params(alpha=0.05)
    assert est.alpha == 0.05


def test_difference_test_matches_functional_core(cgd_trial):
    X, y = xy(cgd_trial)
    est = RMSTDifferenceTest(method="full", t_star=100.0).fit(X, y)
    ref = delta_full(fit_exponential(cgd_trial, FULL_TERMS), 100.0)
    assert est.delta_ == ref.delta_hat and est.std_err_ == ref.std_err
    assert est.reject_ == (ref.z > 1.959963984540054)
    for m in ("nonparametric", "misspec"):
        RMSTDifferenceTest(method=m, t_star=90.0).fit(X, y)


def test_validation(cgd_trial):
    X, y = xy(cgd_trial)
    with pytest.raises(NotFittedError):
        ExponentialPHRegressor().predict(X)
    with pytest.raises(ValueError):
        ExponentialPHRegressor().fit(X[:, :2], y)
    with pytest.raises(ValueError):
        ExponentialPHRegressor().fit(X * 2, y)
    with pytest.raises(ValueError):
        ExponentialPHRegressor().fit(X, y[:, 0])
    with pytest.raises(ValueError):
        RMSTDifferenceTest(method="crossing").fit(X, y)
    with pytest.raises(ValueError):
        RMSTDifferenceTest(method="magic").fit(X, y)
