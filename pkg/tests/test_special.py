import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gwishart import special as sp
from gwishart.errors import DomainError

mp.mp.dps = 30

pos = st.floats(0.05, 30.0)


@given(pos)
def test_log_gamma_matches_mpmath(a):
    assert sp.log_gamma(a) == pytest.approx(float(mp.loggamma(a)), rel=1e-13, abs=1e-13)


def test_log_gamma_rejects_non_positive():
    with pytest.raises(DomainError):
        sp.log_gamma(0.0)


@given(st.integers(1, 8), st.floats(0.0, 20.0))
def test_log_multigamma_product_formula(k, shift):
    a = (k - 1) / 2 + 0.01 + shift
    expect = k * (k - 1) / 4 * mp.log(mp.pi) + mp.fsum(mp.loggamma(a - mp.mpf(j) / 2) for j in range(k))
    assert sp.log_multigamma(k, a) == pytest.approx(float(expect), rel=1e-12, abs=1e-12)


def test_log_multigamma_order_one_is_log_gamma():
    assert sp.log_multigamma(1, 3.7) == pytest.approx(math.lgamma(3.7), abs=1e-14)


def test_log_multigamma_empty_is_zero():
    assert sp.log_multigamma(0, 0.1) == 0.0


def test_log_multigamma_domain():
    with pytest.raises(DomainError):
        sp.log_multigamma(3, 1.0)


@given(st.floats(0.1, 15), st.floats(0.1, 3), st.floats(0.2, 20), st.floats(0.0, 0.95))
def test_hyp2f1_matches_mpmath(a, b, c, x):
    assert sp.hyp2f1(a, b, c, x) == pytest.approx(float(mp.hyp2f1(a, b, c, x)), rel=1e-9)


def test_hyp2f1_rejects_out_of_range():
    with pytest.raises(DomainError):
        sp.hyp2f1(1, 1, 2, 1.0)
    with pytest.raises(DomainError):
        sp.hyp2f1(1, 1, -2.0, 0.5)


@given(st.floats(0.1, 15), st.floats(0.1, 3), st.floats(0.2, 20), st.floats(-50.0, 0.0))
def test_hyp2f1_negative_argument_matches_mpmath(a, b, c, z):
    assert sp.hyp2f1_negative(a, b, c, z) == pytest.approx(float(mp.hyp2f1(a, b, c, z)), rel=1e-9)


@pytest.mark.parametrize("args", [
    (0.5, 0.5, 2.0, 2.5, 2.5),
    (3.0, 0.5, 0.5, 3.5, 3.5),
    (1.2, 0.7, 0.3, 2.1, 1.9),
    (6.0, 0.5, 0.5, 6.5, 6.5),
])
def test_hyp3f2_unit_matches_mpmath(args):
    expect = float(mp.hyp3f2(*args, 1))
    assert sp.hyp3f2_unit(*args) == pytest.approx(expect, rel=1e-10)


@given(st.floats(0.3, 10.0))
def test_hyp3f2_dixon_identity(a):
    # 3F2(a, b, c; 1+a-b, 1+a-c; 1) in gamma form, with b = c = 1/2
    b = c = 0.5
    expect = mp.gamma(1 + a / 2) * mp.gamma(1 + a - b) * mp.gamma(1 + a - c) * mp.gamma(1 + a / 2 - b - c)
    expect /= mp.gamma(1 + a) * mp.gamma(1 + a / 2 - b) * mp.gamma(1 + a / 2 - c) * mp.gamma(1 + a - b - c)
    assert sp.hyp3f2_unit(a, b, c, 1 + a - b, 1 + a - c) == pytest.approx(float(expect), rel=1e-9)


def test_hyp3f2_diverges_without_parameter_excess():
    with pytest.raises(DomainError):
        sp.hyp3f2_unit(1.0, 1.0, 1.0, 1.5, 1.5)


@given(st.floats(-3.0, 1.5), st.floats(1e-3, 200.0))
def test_tricomi_u_half_matches_mpmath(b, x):
    value, err = sp.tricomi_u_half(b, x, with_error=True)
    expect = float(mp.hyperu(0.5, b, x))
    assert value == pytest.approx(expect, rel=1e-10)
    assert err <= 1e-8 * abs(expect)


def test_tricomi_u_half_vectorised():
    xs = np.array([0.1, 1.0, 70.0])
    out = sp.tricomi_u_half(1.0, xs)
    assert out.shape == (3,)
    assert np.allclose(out, [float(mp.hyperu(0.5, 1.0, x)) for x in xs], rtol=1e-10)


@given(st.floats(0.5, 120.0), st.floats(1e-6, 1 - 1e-6))
def test_chi2_quantile_inverts_cdf(nu, p):
    q = sp.chi2_quantile(nu, p)
    assert float(mp.gammainc(nu / 2, 0, q / 2, regularized=True)) == pytest.approx(p, rel=1e-9, abs=1e-12)


def test_chi2_quantile_median_two_dof():
    assert sp.chi2_quantile(2.0, 0.5) == pytest.approx(2 * math.log(2), rel=1e-14)


@given(st.floats(0.5, 200.0), st.floats(1e-8, 1 - 1e-8))
def test_student_t_quantile_inverts_cdf(nu, p):
    q = sp.student_t_quantile(nu, p)
    assert sp.student_t_cdf(nu, q) == pytest.approx(p, rel=1e-9, abs=1e-14)


def test_student_t_quantile_symmetric():
    assert sp.student_t_quantile(3.0, 0.2) == pytest.approx(-sp.student_t_quantile(3.0, 0.8), rel=1e-14)
    assert sp.student_t_quantile(3.0, 0.5) == 0.0


def test_student_t_cauchy_case():
    assert sp.student_t_quantile(1.0, 0.75) == pytest.approx(1.0, rel=1e-10)


@given(st.floats(0.5, 50.0), st.floats(-30.0, 30.0))
def test_student_density_matches_mpmath(nu, t):
    expect = (mp.loggamma((nu + 1) / 2) - mp.loggamma(nu / 2) - mp.log(nu * mp.pi) / 2
              - (nu + 1) / 2 * mp.log1p(t * t / nu))
    assert sp.log_student_t_density(nu, t) == pytest.approx(float(expect), abs=1e-12)


def test_quantiles_reject_bad_probability():
    with pytest.raises(DomainError):
        sp.chi2_quantile(3.0, 1.0)
    with pytest.raises(DomainError):
        sp.student_t_quantile(3.0, 0.0)
