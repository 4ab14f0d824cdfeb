import math

import numpy as np
import pytest

from rmstsim.domain import (FULL_TERMS, MISSPEC_TERMS, CovariateVector, ExpPHParams,
                            FitResult, PiecewiseParams, SubjectRecord, TrialData, as_trial,
                            linear_predictor)
from rmstsim.simulate import CGD_TRUTH, CROSSING_TRUTH


class TestCovariateVector:
    def test_interaction_is_derived(self):
        assert CovariateVector(1, 1, 0).interaction == 1
        assert CovariateVector(1, 0, 1).interaction == 0
        assert CovariateVector(0, 1, 1).interaction == 0

    @pytest.mark.parametrize("bad", [2, -1, 0.5, "1"])
    def test_rejects_non_binary(self, bad):
        with pytest.raises(ValueError):
            CovariateVector(bad, 0, 0)

    def test_frozen(self):
        x = CovariateVector(1, 0, 0)
        with pytest.raises(AttributeError):
            x.treatment = 0


class TestSubjectRecord:
    def test_negative_time(self):
        with pytest.raises(ValueError):
            SubjectRecord(-1.0, 1)

    def test_bad_event(self):
        with pytest.raises(ValueError):
            SubjectRecord(1.0, 2)


class TestExpPHParams:
    def test_invariants(self):
        with pytest.raises(ValueError):
            ExpPHParams(0.0)
        with pytest.raises(ValueError):
            ExpPHParams(0.1, (1.0,), ())
        with pytest.raises(ValueError):
            ExpPHParams(0.1, (1.0,), ("age",))
        with pytest.raises(ValueError):
            ExpPHParams(0.1, (1.0, 2.0), ("sex", "sex"))

    def test_coef_of_absent_term_is_zero(self):
        p = ExpPHParams(0.1, (1.0,), ("treatment",))
        assert p.coef("treatment") == 1.0
        assert p.coef("sex") == 0.0

    def test_theta_round_trip(self):
        p = ExpPHParams.from_theta(CGD_TRUTH.theta, CGD_TRUTH.terms)
        assert p.beta == CGD_TRUTH.beta
        assert p.lam == pytest.approx(CGD_TRUTH.lam, rel=1e-15)

    def test_dict_round_trip_is_exact(self):
        p = ExpPHParams(1 / 3, (math.pi, -1e-17, 2.0**-30, 7.0), FULL_TERMS)
        assert ExpPHParams.from_dict(p.to_dict("truth."), "truth.") == p

    def test_piecewise_dict_round_trip(self):
        d = CROSSING_TRUTH.to_dict("truth.")
        assert d["truth.knot"] == "40.0"
        assert PiecewiseParams.from_dict(d, "truth.") == CROSSING_TRUTH


class TestPiecewiseParams:
    def test_terms_must_match(self):
        with pytest.raises(ValueError):
            PiecewiseParams(10, ExpPHParams(0.1, (1.0,), ("sex",)), ExpPHParams(0.1))

    def test_knot_positive(self):
        with pytest.raises(ValueError):
            PiecewiseParams(0, ExpPHParams(0.1), ExpPHParams(0.1))

    def test_theta_layout(self):
        theta = CROSSING_TRUTH.theta
        assert theta.shape == (10,)
        back = PiecewiseParams.from_theta(theta, CROSSING_TRUTH.terms, 40)
        np.testing.assert_allclose(back.theta, theta, rtol=0, atol=1e-15)


def test_linear_predictor_cgd_example():
    x = CovariateVector(1, 1, 0)
    assert linear_predictor(CGD_TRUTH, x) == pytest.approx(-0.546931, abs=1e-12)


def test_linear_predictor_zero_profile():
    assert linear_predictor(CGD_TRUTH, CovariateVector()) == 0.0


def test_misspecified_ignores_sex():
    p = ExpPHParams(0.1, (-1.0, 0.2, 0.3), MISSPEC_TERMS)
    assert linear_predictor(p, CovariateVector(1, 0, 1)) == -1.0


@pytest.mark.parametrize("field", ["treatment", "inherit", "sex"])
def test_linear_predictor_is_additive(field):
    x0 = CovariateVector(0, 0, 0)
    x1 = CovariateVector(**{field: 1})
    assert linear_predictor(CGD_TRUTH, x1) - linear_predictor(CGD_TRUTH, x0) == \
        pytest.approx(CGD_TRUTH.coef(field))


def test_fit_result_natural_scale():
    cov = np.array([[0.04, 0.01], [0.01, 0.09]])
    fit = FitResult(ExpPHParams(0.5, (0.1,), ("sex",)), cov, -1.0, True, 3)
    nat = fit.covariance_natural
    assert nat[0, 0] == pytest.approx(0.04 * 0.25)
    assert nat[0, 1] == pytest.approx(0.01 * 0.5)
    assert nat[1, 1] == pytest.approx(0.09)


class TestTrialData:
    def test_records_round_trip(self):
        recs = [SubjectRecord(1.5, 1, CovariateVector(1, 0, 1)),
                SubjectRecord(2.0, 0, CovariateVector(0, 1, 0))]
        data = as_trial(recs)
        assert list(data) == recs
        assert as_trial(data) is data

    def test_design_columns(self):
        data = TrialData([1, 2], [1, 0], [1, 1], [1, 0], [0, 1])
        np.testing.assert_array_equal(data.design(FULL_TERMS),
                                      [[1, 1, 0, 1], [1, 0, 1, 0]])
        assert data.design(()).shape == (2, 0)

    def test_unequal_lengths(self):
        with pytest.raises(ValueError):
            TrialData([1, 2], [1], [0, 0], [0, 0], [0, 0])

    def test_immutable_columns(self):
        data = TrialData([1.0], [1], [0], [0], [0])
        with pytest.raises(ValueError):
            data.time[0] = 3.0

    def test_swap_arms(self):
        data = TrialData([1, 2], [1, 1], [1, 0], [0, 0], [0, 0])
        np.testing.assert_array_equal(data.swap_arms().treatment, [0, 1])
