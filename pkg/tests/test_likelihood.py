import itertools
import math

import numpy as np
import pytest
from scipy.special import logsumexp

from copulahmm.errors import NumericalFailure
from copulahmm.likelihood import (
    MatchSeries,
    SeriesBatch,
    information_criteria,
    log_forward,
    log_likelihood,
)
from copulahmm.model import (
    ModelParams,
    ModelSpec,
    emission_probs,
    state_joint_pmf,
    transition_matrices,
)
from copulahmm.simulate import simulate_matches


def log_space_forward(params, match):
    """Unscaled forward recursion carried out entirely with logsumexp."""
    log_e = np.log(emission_probs(params, match.y))
    log_g = np.log(transition_matrices(params, match.x))
    a = np.log(params.delta) + log_e[0]
    for t in range(1, match.T):
        a = logsumexp(a[:, None] + log_g[t], axis=0) + log_e[t]
    return logsumexp(a)


def enumerate_paths(params, match):
    e = emission_probs(params, match.y)
    g = transition_matrices(params, match.x)
    total = 0.0
    for path in itertools.product(range(params.n_states), repeat=match.T):
        p = params.delta[path[0]] * e[0, path[0]]
        for t in range(1, match.T):
            p *= g[t, path[t - 1], path[t]] * e[t, path[t]]
        total += p
    return math.log(total)


class TestMatchSeries:
    def test_coerces_and_freezes(self):
        m = MatchSeries(7, [[1.0, 2.0], [0.0, 3.0]])
        assert m.match_id == "7" and m.T == 2
        assert m.y.dtype == np.int64 and m.x.shape == (2, 0)
        with pytest.raises(ValueError):
            m.y[0, 0] = 5

    @pytest.mark.parametrize("y,x", [([[1, 2, 3]], None), ([[-1, 2]], None), ([[0.5, 2]], None),
                                     (np.zeros((0, 2)), None), ([[1, 2], [3, 4]], np.zeros((3, 1)))])
    def test_invalid(self, y, x):
        with pytest.raises(ValueError):
            MatchSeries("m", y, x)

    def test_vector_covariate_promoted(self):
        assert MatchSeries("m", [[1, 1], [2, 2]], [0.1, 0.2]).x.shape == (2, 1)


class TestForward:
    def test_brute_force_small(self, covariate_model, rng):
        m = MatchSeries("m", rng.integers(0, 6, (6, 2)), rng.normal(size=(6, 2)))
        assert log_forward(covariate_model, m) == pytest.approx(enumerate_paths(covariate_model, m),
                                                                rel=1e-12)

    def test_log_space_oracle_on_long_series(self, ref3):
        # long enough for unscaled probabilities to underflow a double
        m = simulate_matches(ref3, 1, 400, seed=3)[0]
        ll = log_forward(ref3, m)
        assert ll < -800
        assert ll == pytest.approx(log_space_forward(ref3, m), rel=1e-12)

    def test_first_covariate_row_is_unused(self, covariate_model, short_match):
        x = short_match.x.copy()
        x[0] = [50.0, -50.0]
        other = MatchSeries("m1", short_match.y, x)
        assert log_forward(covariate_model, other) == log_forward(covariate_model, short_match)

    def test_row_t_drives_transition_into_t(self, covariate_model, short_match):
        x = short_match.x.copy()
        x[5] += 1.0
        other = MatchSeries("m1", short_match.y, x)
        assert log_forward(covariate_model, other) != log_forward(covariate_model, short_match)

    def test_single_observation(self, ref3):
        m = MatchSeries("m", [[1, 4]])
        want = sum(ref3.delta[i] * state_joint_pmf(ref3, i, (1, 4)) for i in range(3))
        assert log_forward(ref3, m) == pytest.approx(math.log(want), rel=1e-14)

    def test_vanishing_mass_names_match_and_time(self):
        # strongly negative Clayton leaves jointly small counts without mass
        spec = ModelSpec(1, "clayton")
        params = ModelParams(spec, [[3.0, 3.0]], [[1.0, 1.0]], [-0.99])
        m = MatchSeries("bad", [[4, 3], [2, 5], [1, 1]])
        assert state_joint_pmf(params, 0, (1, 1)) == 0.0
        with pytest.raises(NumericalFailure, match=r"'bad' at time index 2"):
            log_forward(params, m)


class TestBatch:
    def test_sum_over_matches(self, ref3):
        ms = simulate_matches(ref3, 4, [10, 20, 5, 1], seed=0)
        batch = SeriesBatch(ms)
        assert batch.n_obs == 36
        per = batch.match_logliks(ref3)
        np.testing.assert_allclose(per, [log_forward(ref3, m) for m in ms], rtol=1e-13)
        assert log_likelihood(ref3, ms) == pytest.approx(per.sum(), rel=1e-14)
        assert log_likelihood(ref3, batch) == pytest.approx(per.sum(), rel=1e-14)

    def test_locate(self, ref3):
        batch = SeriesBatch(simulate_matches(ref3, 3, [4, 2, 5], seed=0))
        assert batch.locate(0) == ("sim001", 0)
        assert batch.locate(5) == ("sim002", 1)
        assert batch.locate(6) == ("sim003", 0)

    def test_covariate_count_mismatch(self, ref3, covariate_model, short_match):
        with pytest.raises(ValueError, match="covariates"):
            log_forward(ref3, short_match)
        with pytest.raises(ValueError, match="disagree"):
            SeriesBatch([short_match, MatchSeries("b", [[0, 0]])])
        with pytest.raises(ValueError):
            SeriesBatch([])


class TestInformationCriteria:
    def test_values(self):
        spec = ModelSpec(2, "clayton")
        aic, bic = information_criteria(-10_000.0, spec, 3214)
        assert aic == 20_026.0
        assert bic == pytest.approx(20_000 + 13 * math.log(3214))

    def test_integer_count(self):
        assert information_criteria(-1.0, 3, 10) == (8.0, 2 + 3 * math.log(10))

    def test_invalid_n_obs(self):
        with pytest.raises(ValueError):
            information_criteria(-1.0, 3, 0)
