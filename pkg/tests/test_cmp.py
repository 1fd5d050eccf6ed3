import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from copulahmm.cmp import (
    CmpConvergenceError,
    CmpParams,
    cdf,
    cdf_table,
    log_normalizing_constant,
    log_pmf,
    mean,
    normalizing_constant,
    pmf,
    pmf_table,
    support_bound,
)


def mp_log_z(lam, nu):
    mpmath.mp.dps = 40
    f = lambda k: mpmath.exp(k * mpmath.log(lam) - nu * mpmath.loggamma(k + 1))
    return float(mpmath.log(mpmath.nsum(f, [0, mpmath.inf])))


class TestParams:
    def test_valid(self):
        p = CmpParams(2, 1)
        assert p.lam == 2.0 and isinstance(p.nu, float)

    @pytest.mark.parametrize("lam,nu", [(0, 1), (-1, 1), (math.inf, 1), (1, -0.1),
                                        (1, math.nan), (1.0, 0.0), (2.0, 0.0)])
    def test_invalid(self, lam, nu):
        with pytest.raises(ValueError):
            CmpParams(lam, nu)

    def test_geometric_boundary_allowed_below_one(self):
        CmpParams(0.999, 0.0)


class TestNormalizingConstant:
    def test_poisson_case(self):
        assert normalizing_constant(CmpParams(2.0, 1.0)) == pytest.approx(math.exp(2), rel=1e-12)

    def test_geometric_case(self):
        assert normalizing_constant(CmpParams(0.5, 0.0)) == pytest.approx(2.0, rel=1e-11)

    def test_bernoulli_limit(self):
        # as nu grows only k = 0, 1 survive
        assert normalizing_constant(CmpParams(0.7, 60.0)) == pytest.approx(1.7, rel=1e-12)

    @pytest.mark.parametrize("lam,nu", [(0.125, 0.206), (0.971, 0.102), (2.381, 0.39),
                                        (2.145, 0.352), (0.67, 1e-8), (15.0, 2.5), (0.05, 1.5)])
    def test_against_high_precision_sum(self, lam, nu):
        assert log_normalizing_constant(CmpParams(lam, nu)) == pytest.approx(
            mp_log_z(lam, nu), rel=1e-11, abs=1e-11)

    def test_slow_series_raises(self):
        with pytest.raises(CmpConvergenceError, match="10000 terms"):
            log_normalizing_constant(CmpParams(0.9999999, 0.0))

    def test_huge_lambda_small_nu_raises(self):
        with pytest.raises(CmpConvergenceError):
            log_normalizing_constant(CmpParams(50.0, 0.01))


class TestPmf:
    def test_poisson_agreement(self):
        k = np.arange(30)
        np.testing.assert_allclose(pmf(CmpParams(3.3, 1.0), k), stats.poisson.pmf(k, 3.3),
                                   rtol=1e-11)

    def test_geometric_agreement(self):
        k = np.arange(40)
        np.testing.assert_allclose(pmf(CmpParams(0.4, 0.0), k), 0.6 * 0.4 ** k, rtol=1e-10)

    def test_scalar_returns_float(self):
        assert isinstance(pmf(CmpParams(1, 1), 3), float)
        assert isinstance(log_pmf(CmpParams(1, 1), 3), float)

    def test_negative_support_rejected(self):
        with pytest.raises(ValueError):
            pmf(CmpParams(1, 1), -1)

    def test_far_tail_is_tiny(self):
        assert pmf(CmpParams(1.093, 0.149), 60) < 1e-10

    @settings(max_examples=60, deadline=None)
    @given(lam=st.floats(0.01, 6.0), nu=st.floats(0.3, 3.0))
    def test_mass_sums_to_one(self, lam, nu):
        p = CmpParams(lam, nu)
        k = support_bound(p, 1e-13)
        assert pmf_table(p, k + 5).sum() == pytest.approx(1.0, abs=1e-11)


class TestCdf:
    def test_table_layout(self):
        p = CmpParams(1.2, 0.8)
        table = cdf_table(p, 5)
        assert table.shape == (7,)
        assert table[0] == 0.0
        np.testing.assert_allclose(np.diff(table), pmf_table(p, 5), rtol=1e-12)

    def test_negative_argument_is_zero(self):
        assert cdf(CmpParams(1, 1), -1) == 0.0
        assert cdf(CmpParams(1, 1), -7) == 0.0

    def test_non_integer_rejected(self):
        with pytest.raises(ValueError):
            cdf(CmpParams(1, 1), 1.5)

    def test_never_exceeds_one(self):
        assert cdf_table(CmpParams(0.2, 2.0), 200).max() <= 1.0

    @settings(max_examples=50, deadline=None)
    @given(lam=st.floats(0.01, 5.0), nu=st.floats(0.3, 3.0))
    def test_monotone(self, lam, nu):
        table = cdf_table(CmpParams(lam, nu), 40)
        assert np.all(np.diff(table) >= 0)


class TestMean:
    def test_poisson_mean(self):
        assert mean(CmpParams(3.0, 1.0)) == pytest.approx(3.0, rel=1e-12)

    def test_geometric_mean(self):
        assert mean(CmpParams(0.5, 0.0)) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("lam,nu,want", [(0.125, 0.206, 0.1375), (0.149, 0.001, 0.1750),
                                             (0.971, 0.102, 4.0845), (2.381, 0.390, 10.0721)])
    def test_frozen_values(self, lam, nu, want):
        # independently confirmed with a 40-digit series sum
        assert mean(CmpParams(lam, nu)) == pytest.approx(want, abs=5e-5)

    @pytest.mark.parametrize("lam,nu,published", [(0.125, 0.206, 0.138), (0.149, 0.001, 0.175),
                                                  (0.971, 0.102, 4.080), (2.381, 0.390, 10.104)])
    def test_published_means_within_rounding_envelope(self, lam, nu, published):
        # parameters are printed to three decimals; the mean rises in lambda
        # and falls in nu, so the corners bound what rounding can explain
        lo = mean(CmpParams(lam - 5e-4, nu + 5e-4))
        hi = mean(CmpParams(lam + 5e-4, nu - 5e-4))
        assert lo - 5e-4 <= published <= hi + 5e-4

    def test_truncation_point(self):
        p = CmpParams(0.9, 0.0)
        assert mean(p, d=5) < mean(p, d=100)
        with pytest.raises(ValueError):
            mean(p, d=0)


class TestSupportBound:
    def test_definition(self):
        p = CmpParams(2.145, 0.352)
        k = support_bound(p, 1e-10)
        assert 1 - cdf(p, k) < 1e-10 <= 1 - cdf(p, k - 1)

    def test_cap(self):
        with pytest.raises(CmpConvergenceError):
            support_bound(CmpParams(0.99, 0.0), 1e-10, kmax=100)
