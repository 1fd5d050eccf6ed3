import warnings

import numpy as np
import pytest

from copulahmm.errors import FitError, StartRejected
from copulahmm.estimation import (
    OptimizerSettings,
    StartRanges,
    covariance_estimate,
    covariance_from_hessian,
    fit,
    multi_start_fit,
    numerical_hessian,
    objective,
    order_states,
    transition_curve_ci,
)
from copulahmm.likelihood import SeriesBatch
from copulahmm.model import ModelParams, ModelSpec, intercepts_from_tpm, num_params, pack, unpack
from copulahmm.simulate import simulate_matches


@pytest.fixture(scope="module")
def two_state():
    spec = ModelSpec(2, "frank")
    return ModelParams(spec, [[0.15, 1.0], [0.3, 4.0]], [[0.8, 0.5], [0.6, 0.9]], [3.0, 1.0],
                       [0.5, 0.5], intercepts_from_tpm([[0.9, 0.1], [0.2, 0.8]]))


@pytest.fixture(scope="module")
def two_state_data(two_state):
    return SeriesBatch(simulate_matches(two_state, 6, 80, seed=11))


@pytest.fixture(scope="module")
def two_state_fit(two_state, two_state_data):
    # started from the truth, so the run is short and lands at the nearby optimum
    return fit(two_state.spec, two_state_data, pack(two_state), covariance=True)


@pytest.fixture(scope="module")
def covariate_fit():
    spec = ModelSpec(2, "clayton", ("minute",), ((48.0, 27.0),))
    coeffs = np.zeros((2, 2, 2))
    coeffs[0, 1] = [-2.0, 0.8]
    coeffs[1, 0] = [-1.5, -0.5]
    truth = ModelParams(spec, [[0.1, 1.0], [0.3, 4.0]], [[1, 0.6], [1, 0.8]], [1.0, 0.5],
                        None, coeffs)
    data = SeriesBatch(simulate_matches(truth, 10, 95, seed=4))
    return fit(spec, data, pack(truth), covariance=True), data


class TestStartRanges:
    def test_draw_within_ranges(self, rng):
        ranges = StartRanges()
        spec = ModelSpec(3, "amh", ("minute", "home"))
        for _ in range(20):
            p = unpack(spec, ranges.draw(spec, rng))
            assert np.all((p.lam[:, 0] >= 0.05) & (p.lam[:, 0] <= 0.5))
            assert np.all((p.lam[:, 1] >= 0.5) & (p.lam[:, 1] <= 5.0))
            assert np.all((p.nu >= 0.05) & (p.nu <= 1.5))
            assert np.all(np.abs(p.theta) <= 0.9 + 1e-12)
            off = ~np.eye(3, dtype=bool)
            assert np.all((p.coeffs[off, 0] >= -3) & (p.coeffs[off, 0] <= -1))
            assert np.all(np.abs(p.coeffs[off, 1:]) <= 0.5)

    def test_independence_draw_has_no_theta(self, rng):
        spec = ModelSpec(2)
        assert StartRanges().draw(spec, rng).shape == (num_params(spec),)


class TestFit:
    def test_improves_on_truth(self, two_state, two_state_data, two_state_fit):
        assert two_state_fit.converged
        assert two_state_fit.loglik >= two_state_data.loglik(two_state) - 1e-6
        assert two_state_fit.n_obs == 480
        assert two_state_fit.aic == pytest.approx(-2 * two_state_fit.loglik + 2 * 13)

    def test_gradient_vanishes_at_optimum(self, two_state_fit, two_state_data):
        f = objective(two_state_fit.spec, two_state_data)
        w = two_state_fit.working
        h = 1e-5
        grad = [(f(w + h * e) - f(w - h * e)) / (2 * h) for e in np.eye(len(w))]
        assert np.max(np.abs(grad)) / two_state_data.n_obs < 1e-4

    def test_working_and_params_agree(self, two_state_fit):
        np.testing.assert_allclose(pack(two_state_fit.params), two_state_fit.working)

    def test_bad_start(self, two_state, two_state_data):
        w = pack(two_state)
        w[0] = np.nan
        with pytest.raises(StartRejected):
            fit(two_state.spec, two_state_data, w)
        with pytest.raises(ValueError):
            fit(two_state.spec, two_state_data, w[:-1])

    def test_nelder_mead_fallback(self, two_state, two_state_data):
        settings = OptimizerSettings(maxiter=3, bfgs_restarts=0)
        res = fit(two_state.spec, two_state_data, pack(two_state), settings)
        assert "Nelder-Mead" in res.message


class TestMultiStart:
    def test_deterministic(self, two_state, two_state_data):
        a = multi_start_fit(two_state.spec, two_state_data, 2, seed=3, covariance=False)
        b = multi_start_fit(two_state.spec, two_state_data, 2, seed=3, covariance=False)
        assert a.loglik == b.loglik
        np.testing.assert_array_equal(a.working, b.working)
        assert a.n_starts == 2 and len(a.start_logliks) == 2

    def test_ties_go_to_lowest_index(self, two_state, two_state_data):
        w = pack(two_state)
        res = multi_start_fit(two_state.spec, two_state_data, starts=[w, w], covariance=False)
        assert res.best_start_index == 0

    def test_failed_starts_are_skipped(self, two_state, two_state_data):
        bad = np.full(num_params(two_state.spec), np.nan)
        res = multi_start_fit(two_state.spec, two_state_data, starts=[bad, pack(two_state)],
                              covariance=False)
        assert res.best_start_index == 1
        assert np.isnan(res.start_logliks[0])

    def test_all_starts_failing(self, two_state, two_state_data):
        bad = np.full(num_params(two_state.spec), np.nan)
        with pytest.raises(FitError, match="all starts failed"):
            multi_start_fit(two_state.spec, two_state_data, starts=[bad, bad])

    def test_covariance_failure_keeps_fit(self, two_state, two_state_data, monkeypatch):
        import copulahmm.estimation as est

        def boom(*args):
            raise est.NumericalFailure("series diverged")
        monkeypatch.setattr(est, "covariance_estimate", boom)
        with pytest.warns(RuntimeWarning, match="covariance not available"):
            res = multi_start_fit(two_state.spec, two_state_data, starts=[pack(two_state)])
        assert res.working_cov is None and res.converged

    def test_needs_a_start(self, two_state, two_state_data):
        with pytest.raises(ValueError):
            multi_start_fit(two_state.spec, two_state_data, 0)


class TestCovariance:
    def test_hessian_of_quadratic(self):
        a = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, -0.5], [0.0, -0.5, 2.0]])
        f = lambda w: 0.5 * w @ a @ w + w.sum()
        np.testing.assert_allclose(numerical_hessian(f, np.array([0.3, -1.0, 2.0])), a,
                                   rtol=1e-6, atol=1e-6)

    def test_inverse(self):
        h = np.array([[2.0, 0.5], [0.5, 1.0]])
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            np.testing.assert_allclose(covariance_from_hessian(h), np.linalg.inv(h))

    def test_ill_conditioned_uses_pinv(self):
        with pytest.warns(RuntimeWarning, match="pseudo-inverse"):
            cov = covariance_from_hessian(np.diag([1.0, 1e-14]))
        assert np.all(np.isfinite(cov))

    def test_indefinite_truncated(self):
        with pytest.warns(RuntimeWarning, match="not positive definite"):
            cov = covariance_from_hessian(np.diag([2.0, -1.0]))
        np.testing.assert_allclose(cov, np.diag([0.5, 0.0]))

    def test_fit_covariance_is_psd(self, two_state_fit):
        cov = two_state_fit.working_cov
        np.testing.assert_allclose(cov, cov.T)
        assert np.linalg.eigvalsh(cov).min() >= -1e-12
        # standard errors of log lambda are of the order 1/sqrt(n)
        assert 0.01 < np.sqrt(cov[0, 0]) < 1.0


class TestOrderStates:
    def test_sorted_and_equivalent(self, two_state, two_state_data, two_state_fit):
        flipped = order_states(two_state_fit, [1, 0])
        assert flipped.params.lam[0, 1] == two_state_fit.params.lam[1, 1]
        assert two_state_data.loglik(flipped.params) == pytest.approx(two_state_fit.loglik,
                                                                      rel=1e-12)
        back = order_states(flipped)
        np.testing.assert_allclose(back.working, two_state_fit.working, atol=1e-12)

    def test_covariance_transforms_like_a_refit(self, two_state_fit, two_state_data):
        flipped = order_states(two_state_fit, [1, 0])
        direct = covariance_estimate(flipped, two_state_data)
        np.testing.assert_allclose(flipped.working_cov, direct, rtol=2e-3, atol=5e-5)

    def test_identity_is_noop(self, two_state_fit):
        assert order_states(two_state_fit, [0, 1]) is two_state_fit


class TestTransitionCurves:
    def test_bands_bracket_point(self, covariate_fit):
        res, _ = covariate_fit
        grid = np.arange(1, 96, 5)
        curves = transition_curve_ci(res, "minute", grid, n_draws=400, seed=1)
        assert curves.point.shape == (len(grid), 2, 2)
        assert np.all(curves.lower <= curves.point + 1e-12)
        assert np.all(curves.point <= curves.upper + 1e-12)
        assert np.all(curves.upper - curves.lower > 0)
        np.testing.assert_allclose(curves.point.sum(axis=-1), 1.0)

    def test_seeded(self, covariate_fit):
        res, _ = covariate_fit
        a = transition_curve_ci(res, "minute", [10, 80], n_draws=50, seed=7)
        b = transition_curve_ci(res, "minute", [10, 80], n_draws=50, seed=7)
        np.testing.assert_array_equal(a.lower, b.lower)

    def test_zero_covariance_collapses_bands(self, covariate_fit):
        res, _ = covariate_fit
        zero = np.zeros((res.n_params, res.n_params))
        curves = transition_curve_ci(res, "minute", [30.0], n_draws=20, cov=zero)
        np.testing.assert_allclose(curves.lower, curves.point, atol=1e-12)
        np.testing.assert_allclose(curves.upper, curves.point, atol=1e-12)

    def test_errors(self, covariate_fit):
        res, _ = covariate_fit
        with pytest.raises(ValueError, match="not part"):
            transition_curve_ci(res, "home", [0, 1])
        bad = -np.eye(res.n_params)
        with pytest.raises(ValueError, match="positive semidefinite"):
            transition_curve_ci(res, "minute", [1.0], cov=bad)
