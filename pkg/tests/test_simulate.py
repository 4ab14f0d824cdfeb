import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate

from rmstsim.domain import CovariateVector
from rmstsim.models import arm_average_survival, rate
from rmstsim.simulate import (CGD_TRUTH, CROSSING_TRUTH, TrialDesign, generate_latent,
                              generate_trial, null_design, permute_treatment, read_trial_csv,
                              replication_rng, write_trial_csv)

ALL_X = [CovariateVector(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)]


class TestDesign:
    @pytest.mark.parametrize("kwargs", [
        {"n_subjects": 0}, {"n_subjects": 2.5}, {"accrual_window": 0.0},
        {"accrual_window": 130.0}, {"censor_rate": -0.1}, {"covariate_prob": 1.5},
        {"seed": -1}, {"seed": 2**64},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            TrialDesign(**kwargs)


def test_reproducible(cgd_design):
    a = generate_trial(cgd_design, 3)
    b = generate_trial(cgd_design, 3)
    for col in ("time", "event", "treatment", "inherit", "sex"):
        np.testing.assert_array_equal(getattr(a, col), getattr(b, col))
    c = generate_trial(cgd_design, 4)
    assert not np.array_equal(a.time, c.time)


def test_streams_independent_of_order():
    first = replication_rng(9, 5).random(4)
    replication_rng(9, 4).random(100)
    assert np.array_equal(first, replication_rng(9, 5).random(4))


def test_observation_rule(cgd_design):
    for k in range(20):
        lat = generate_latent(cgd_design, k)
        data = generate_trial(cgd_design, k)
        limit = cgd_design.analysis_time - lat.arrival
        expect = np.minimum(np.minimum(lat.event_time, lat.censor_time), limit)
        np.testing.assert_array_equal(data.time, expect)
        np.testing.assert_array_equal(data.event,
                                      lat.event_time <= np.minimum(lat.censor_time, limit))
        assert np.all(data.time > 0)
        assert np.all(data.time <= cgd_design.analysis_time)


def test_no_censoring_means_all_events():
    design = TrialDesign(CGD_TRUTH, censor_rate=0.0, accrual_window=1e-9,
                         analysis_time=1e9, seed=3)
    lat = generate_latent(design, 0)
    data = generate_trial(design, 0)
    assert data.event.all()
    np.testing.assert_array_equal(data.time, lat.event_time)


def _censoring_oracle(design):
    """Expected overall and random-censoring fractions by quadrature."""
    c = design.censor_rate
    total = random = 0.0
    for x in ALL_X:
        r = rate(design.truth, x)
        w = 1 / 8
        def censored(a):
            limit = design.analysis_time - a
            return 1 - r / (r + c) * -math.expm1(-(r + c) * limit)
        def rand(a):
            limit = design.analysis_time - a
            return c / (r + c) * -math.expm1(-(r + c) * limit)
        A = design.accrual_window
        total += w * integrate.quad(censored, 0, A)[0] / A
        random += w * integrate.quad(rand, 0, A)[0] / A
    return total, random


def test_censoring_fractions_match_oracle():
    design = TrialDesign(CGD_TRUTH, seed=11)
    overall = rand = 0
    n = 0
    for k in range(2000):
        lat = generate_latent(design, k)
        limit = design.analysis_time - lat.arrival
        overall += np.count_nonzero(lat.event_time > np.minimum(lat.censor_time, limit))
        rand += np.count_nonzero(lat.censor_time < np.minimum(lat.event_time, limit))
        n += design.n_subjects
    want_total, want_random = _censoring_oracle(design)
    se = math.sqrt(0.25 / n) * 3
    assert overall / n == pytest.approx(want_total, abs=4 * se)
    assert rand / n == pytest.approx(want_random, abs=4 * se)
    # The headline "about 40% censored" holds.
    assert abs(overall / n - 0.40) < 0.02


@pytest.mark.xfail(reason="the stated design gives about 6.6% random censoring, not 10%; "
                          "see the censoring oracle above", strict=True)
def test_random_censoring_about_ten_percent():
    _, want_random = _censoring_oracle(TrialDesign(CGD_TRUTH))
    assert abs(want_random - 0.10) <= 0.02


def test_covariate_probability(cgd_design):
    design = replace(cgd_design, covariate_prob=0.2, n_subjects=20_000)
    data = generate_trial(design, 0)
    for col in (data.treatment, data.inherit, data.sex):
        assert col.mean() == pytest.approx(0.2, abs=0.015)


class TestNullDesign:
    def test_exponential(self, cgd_design):
        truth = null_design(cgd_design).truth
        assert truth.coef("treatment") == 0 and truth.coef("interaction") == 0
        assert truth.lam == CGD_TRUTH.lam
        assert truth.coef("inherit") == CGD_TRUTH.coef("inherit")
        assert truth.coef("sex") == CGD_TRUTH.coef("sex")

    def test_idempotent(self, cgd_design):
        once = null_design(cgd_design)
        assert null_design(once) == once

    def test_piecewise(self, crossing_design):
        truth = null_design(crossing_design).truth
        for piece in (truth.before, truth.after):
            assert piece.coef("treatment") == 0 and piece.coef("interaction") == 0


class TestPermute:
    def test_rejects_exponential(self, cgd_design):
        with pytest.raises(TypeError):
            permute_treatment(cgd_design)

    def test_involution(self, crossing_design):
        back = permute_treatment(permute_treatment(crossing_design)).truth
        t = np.linspace(0, 120, 61)
        for arm in (0, 1):
            np.testing.assert_allclose(arm_average_survival(t, back, arm),
                                       arm_average_survival(t, CROSSING_TRUTH, arm), rtol=1e-12)

    def test_swaps_arms_exactly(self, crossing_design):
        swapped = permute_treatment(crossing_design).truth
        t = np.linspace(0, 120, 61)
        np.testing.assert_allclose(arm_average_survival(t, swapped, 1),
                                   arm_average_survival(t, CROSSING_TRUTH, 0), rtol=1e-12)

    def test_treatment_worse_early(self, crossing_design):
        swapped = permute_treatment(crossing_design).truth
        assert arm_average_survival(20.0, swapped, 1) < arm_average_survival(20.0, swapped, 0)


def test_csv_round_trip(tmp_path, cgd_trial):
    path = tmp_path / "trial.csv"
    write_trial_csv(path, cgd_trial)
    lines = path.read_text().splitlines()
    assert lines[0] == "time,event,treatment,inherit,sex"
    assert len(lines) == 101
    assert len(lines[1].split(",")[0].split(".")[1]) == 6
    back = read_trial_csv(path)
    np.testing.assert_allclose(back.time, cgd_trial.time, atol=5e-7)
    np.testing.assert_array_equal(back.event, cgd_trial.event)
    np.testing.assert_array_equal(back.sex, cgd_trial.sex)
