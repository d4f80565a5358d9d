import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import special, stats

from akmsense.specfun import (
    ConvergenceError,
    DomainError,
    SeriesControl,
    bessel_i,
    ext_incomplete_gamma,
    fox_h_2002,
    gamma_fn,
    log_bessel_i,
    log_ext_incomplete_gamma_x0,
    log_fox_h_2002,
    log_gamma,
    lower_incomplete_gamma_reg,
    marcum_q,
    upper_incomplete_gamma,
    upper_incomplete_gamma_reg,
)

# reference values from 30-digit mpmath quadrature (tools/gen_oracles.py)
GAMMA_4_2 = 7.7566895357931794
UPPER_GAMMA_25_13 = 1.0121136007032034
BESSEL_I_17_23 = 1.3021632979672265
MARCUM_2_1_15 = 0.77799237054979209
EXT_15_0_08_M1 = 0.41312472918755175
EXT_2_15_06_05 = 0.20910242733638153
FOX_08_235 = 0.36204597313941986


class TestGamma:
    def test_integer_and_half(self):
        assert gamma_fn(1.0) == pytest.approx(1.0, rel=1e-15)
        assert gamma_fn(5.0) == pytest.approx(24.0, rel=1e-14)
        assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)

    def test_quadrature_value(self):
        assert gamma_fn(4.2) == pytest.approx(GAMMA_4_2, rel=1e-13)

    @pytest.mark.parametrize("x", [1e-3, 0.1, 0.7, 1.5, 3.3, 10.25, 57.5, 140.0, 171.0])
    def test_matches_mpmath(self, x):
        assert gamma_fn(x) == pytest.approx(float(mp.gamma(x)), rel=1e-13)
        assert log_gamma(x) == pytest.approx(float(mp.loggamma(x)), rel=1e-13, abs=1e-14)

    @pytest.mark.parametrize("x", [0.0, -1.0, -2.5])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            gamma_fn(x)


class TestIncompleteGamma:
    @pytest.mark.parametrize("x", [0.0, 0.3, 2.0, 17.0])
    def test_order_one(self, x):
        assert upper_incomplete_gamma(1.0, x) == pytest.approx(math.exp(-x), rel=1e-14)

    @pytest.mark.parametrize("a", [0.3, 1.0, 2.5, 7.0])
    def test_zero_lower_limit(self, a):
        assert upper_incomplete_gamma(a, 0.0) == pytest.approx(gamma_fn(a), rel=1e-14)

    def test_quadrature_value(self):
        assert upper_incomplete_gamma(2.5, 1.3) == pytest.approx(UPPER_GAMMA_25_13, rel=1e-12)

    @pytest.mark.parametrize("a,x", [(0.5, 0.01), (2.0, 3.0), (10.0, 4.0), (10.0, 25.0), (150.0, 140.0)])
    def test_regularized_pair(self, a, x):
        q = upper_incomplete_gamma_reg(a, x)
        p = lower_incomplete_gamma_reg(a, x)
        assert 0.0 <= q <= 1.0
        assert p + q == pytest.approx(1.0, abs=1e-14)
        assert q == pytest.approx(special.gammaincc(a, x), rel=1e-12, abs=1e-300)

    @pytest.mark.parametrize("a,x", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.1)])
    def test_domain(self, a, x):
        with pytest.raises(DomainError):
            upper_incomplete_gamma(a, x)


class TestBessel:
    def test_origin(self):
        assert bessel_i(0.0, 0.0) == 1.0

    def test_half_order_point(self):
        assert bessel_i(0.5, 1.0) == pytest.approx(math.sqrt(2 / math.pi) * math.sinh(1.0), rel=1e-13)

    def test_integral_representation_value(self):
        assert bessel_i(1.7, 2.3) == pytest.approx(BESSEL_I_17_23, rel=1e-12)

    @pytest.mark.parametrize("z", np.linspace(0.05, 10.0, 25))
    def test_half_order_closed_forms(self, z):
        assert_allclose(bessel_i(0.5, z), math.sqrt(2 / (math.pi * z)) * math.sinh(z), rtol=1e-9)
        assert_allclose(bessel_i(-0.5, z), math.sqrt(2 / (math.pi * z)) * math.cosh(z), rtol=1e-9)

    @pytest.mark.parametrize("nu", [-0.3, 0.0, 1.5, 4.0])
    @pytest.mark.parametrize("z", [1e-4, 0.7, 12.0, 60.0, 400.0])
    def test_log_form(self, nu, z):
        assert log_bessel_i(nu, z) == pytest.approx(float(mp.log(mp.besseli(nu, z))), rel=1e-12, abs=1e-12)

    def test_nonconvergence_reported(self):
        with pytest.raises(ConvergenceError) as info:
            bessel_i(0.0, 50.0, SeriesControl(max_terms=5))
        assert info.value.partial_sum > 0


class TestMarcumQ:
    @pytest.mark.parametrize("u", [1, 2, 5])
    @pytest.mark.parametrize("b", [0.0, 0.5, 2.0, 6.0])
    def test_zero_noncentrality(self, u, b):
        assert marcum_q(u, 0.0, b) == pytest.approx(upper_incomplete_gamma_reg(u, b * b / 2), abs=1e-15)

    @pytest.mark.parametrize("u", [1, 3])
    def test_zero_threshold(self, u):
        assert marcum_q(u, 2.3, 0.0) == 1.0
        assert marcum_q(u, 1.0, 5e-324) == 1.0  # b*b underflows

    def test_tail_quadrature_value(self):
        assert marcum_q(2, 1.0, 1.5) == pytest.approx(MARCUM_2_1_15, abs=1e-13)

    @pytest.mark.parametrize("u,a,b", [(1, 3.0, 2.0), (2, 10.0, 12.0), (4, 45.0, 44.0), (2, 40.0, 40.5)])
    def test_against_noncentral_chi2(self, u, a, b):
        # includes a^2/2 > 700, where the Poisson weights must stay in log space
        assert marcum_q(u, a, b) == pytest.approx(stats.ncx2.sf(b * b, 2 * u, a * a), abs=1e-11)

    def test_monotone_grid(self):
        grid = np.linspace(0.0, 8.0, 20)
        q = np.array([[marcum_q(2, a, b) for b in grid] for a in grid])
        # slack covers rounding of values within 1e-13 of 1
        assert np.all(np.diff(q, axis=1) <= 1e-12)  # non-increasing in b
        assert np.all(np.diff(q, axis=0) >= -1e-12)  # non-decreasing in a

    @pytest.mark.parametrize("lam", np.geomspace(0.01, 60.0, 12))
    def test_ties_to_false_alarm(self, lam):
        assert abs(marcum_q(2, 0.0, math.sqrt(lam)) - upper_incomplete_gamma_reg(2, lam / 2)) <= 1e-10

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 6), st.floats(0, 30), st.floats(0, 30))
    def test_is_probability(self, u, a, b):
        assert 0.0 <= marcum_q(u, a, b) <= 1.0


class TestExtendedIncompleteGamma:
    @pytest.mark.parametrize("a", [0.4, 1.0, 3.7])
    def test_no_extension(self, a):
        assert ext_incomplete_gamma(a, 0.0, 0.0, -1.0) == pytest.approx(gamma_fn(a), rel=1e-13)

    @pytest.mark.parametrize("a,x", [(0.5, 0.2), (2.0, 1.0), (4.5, 7.0)])
    def test_reduces_to_upper(self, a, x):
        assert abs(ext_incomplete_gamma(a, x, 0.0, 0.7) - upper_incomplete_gamma(a, x)) <= 1e-10

    def test_quadrature_value(self):
        assert ext_incomplete_gamma(1.5, 0.0, 0.8, -1.0) == pytest.approx(EXT_15_0_08_M1, rel=1e-11)
        assert ext_incomplete_gamma(2.0, 1.5, 0.6, 0.5) == pytest.approx(EXT_2_15_06_05, rel=1e-11)

    def test_negative_order_with_decay(self):
        # a <= 0 is integrable at 0 when beta < 0 and b > 0
        ref = mp.quad(lambda y: mp.e ** (-0.5 * y - mp.e ** y - 0.3 * mp.e ** (-y)), [-30, 0, 7])
        assert ext_incomplete_gamma(-0.5, 0.0, 0.3, -1.0) == pytest.approx(float(ref), rel=1e-10)

    @pytest.mark.parametrize("args", [(1.0, -1.0, 0.1, 1.0), (1.0, 0.0, -0.1, 1.0),
                                      (1.0, 0.0, 0.1, 0.0), (-0.5, 0.0, 0.2, 0.5)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            ext_incomplete_gamma(*args)

    def test_vectorised_kernel(self):
        a = np.array([0.6, 2.35, 9.0, 30.0])
        got = log_ext_incomplete_gamma_x0(a, 0.8, 0.675)
        want = [math.log(ext_incomplete_gamma(x, 0.0, 0.8, 0.675)) for x in a]
        assert_allclose(got, want, rtol=1e-12)


class TestFoxH:
    def test_small_argument_limit(self):
        assert fox_h_2002(1e-12, 2.35, -0.675) == pytest.approx(gamma_fn(2.35), rel=1e-9)

    def test_quadrature_value(self):
        assert fox_h_2002(0.8, 2.35, -0.675) == pytest.approx(FOX_08_235, rel=1e-11)

    @pytest.mark.parametrize("z,b2,B2", [(0.3, 1.2, -0.35), (0.8, 2.35, -0.675), (2.0, 3.0, -0.5),
                                         (0.5, 4.0, -0.9)])
    def test_residue_series(self, z, b2, B2):
        # Mellin-Barnes residues at the poles of Gamma(s): sum_j (-z)^j Gamma(b2 - B2 j) / j!
        ref = mp.nsum(lambda j: (-z) ** j / mp.factorial(j) * mp.gamma(b2 - B2 * j), [0, mp.inf])
        assert fox_h_2002(z, b2, B2) == pytest.approx(float(ref), rel=1e-10)

    @pytest.mark.parametrize("z,b2,B2", [(0.1, 0.7, -0.35), (1.7, 5.5, -1.5), (9.0, 2.0, -1.0)])
    def test_extended_gamma_bridge(self, z, b2, B2):
        assert fox_h_2002(z, b2, B2) == ext_incomplete_gamma(b2, 0.0, z, -B2)

    def test_log_vector_form(self):
        b2 = np.array([0.9, 2.35, 11.0])
        assert_allclose(np.exp(log_fox_h_2002(0.8, b2, -0.675)),
                        [fox_h_2002(0.8, b, -0.675) for b in b2], rtol=1e-12)

    @pytest.mark.parametrize("B2", [0.0, 0.5])
    def test_unsupported_pattern(self, B2):
        with pytest.raises(DomainError):
            fox_h_2002(0.5, 1.0, B2)


class TestSeriesControl:
    @pytest.mark.parametrize("kw", [dict(rel_tol=0.0), dict(abs_tol=-1.0), dict(max_terms=0)])
    def test_validation(self, kw):
        with pytest.raises(DomainError):
            SeriesControl(**kw)

    def test_truncation_independence(self):
        lo, hi = SeriesControl(max_terms=1000), SeriesControl(max_terms=10000)
        assert bessel_i(1.3, 25.0, lo) == bessel_i(1.3, 25.0, hi)
        assert marcum_q(3, 7.0, 8.0, lo) == marcum_q(3, 7.0, 8.0, hi)
