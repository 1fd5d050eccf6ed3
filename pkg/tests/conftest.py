import sys

import numpy as np
import pytest

from copulahmm.likelihood import MatchSeries
from copulahmm.model import ModelParams, ModelSpec

from reference_models import reference_model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ref3():
    return reference_model()


@pytest.fixture
def covariate_model():
    """Two-state Frank model with two covariates."""
    spec = ModelSpec(2, "frank", ("score_diff", "minute"), ((0.0, 1.5), (48.0, 27.0)))
    coeffs = np.zeros((2, 2, 3))
    coeffs[0, 1] = [-2.0, 0.4, -0.3]
    coeffs[1, 0] = [-1.5, -0.2, 0.5]
    return ModelParams(spec, [[0.2, 1.0], [0.15, 2.5]], [[0.6, 0.3], [0.4, 0.35]],
                       [2.0, -1.0], [0.6, 0.4], coeffs)


@pytest.fixture
def short_match(rng):
    return MatchSeries("m1", rng.integers(0, 5, (12, 2)), rng.normal(size=(12, 2)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
