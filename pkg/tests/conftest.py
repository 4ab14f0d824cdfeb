import numpy as np
import pytest

from rmstsim.domain import TrialData
from rmstsim.simulate import CGD_TRUTH, CROSSING_TRUTH, TrialDesign, generate_trial


@pytest.fixture
def cgd_design():
    return TrialDesign(CGD_TRUTH, seed=7)


@pytest.fixture
def crossing_design():
    return TrialDesign(CROSSING_TRUTH, n_subjects=130, seed=7)


@pytest.fixture
def cgd_trial(cgd_design):
    return generate_trial(cgd_design, 0)


def make_trial(time, event, treatment=None, inherit=None, sex=None):
    n = len(time)
    zeros = np.zeros(n, dtype=int)
    return TrialData(np.asarray(time, dtype=float), np.asarray(event),
                     zeros if treatment is None else treatment,
                     zeros if inherit is None else inherit,
                     zeros if sex is None else sex)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[n])
