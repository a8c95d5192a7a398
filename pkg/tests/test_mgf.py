import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from reflocal import MgfQuery, ReflectionParams, big_v, f_hat, f_hat_decomposition, hitting_laplace, ode_residual
from reflocal.errors import DomainError
from reflocal.mgf import SMALL_LAMBDA

B1 = ReflectionParams(1.0)


def query(alpha, lam, b=1.0):
    return MgfQuery(ReflectionParams(b), lam, alpha)


@given(st.floats(-10, 10), st.floats(0.01, 20), st.floats(0, 1), st.sampled_from([0.5, 1.0, 2.0]))
def test_stable_matches_literal(alpha, lam, u, b):
    p = ReflectionParams(b)
    assume(lam > big_v(alpha, p).value * (1 + 1e-3) + 1e-3)
    q = MgfQuery(p, lam, alpha)
    x = u * b
    dec = f_hat_decomposition(q, x)
    val = f_hat(q, x).value
    assert val == pytest.approx(dec.direct_value, rel=1e-9, abs=1e-12)
    assert dec.B == pytest.approx(math.exp(2 * b * math.sqrt(2 * lam)) * dec.A, rel=1e-12)


def test_known_values():
    q = query(-1.0, 0.5)
    assert f_hat(q, 1.0).value == pytest.approx(1.2642411176571153, rel=1e-14)
    assert f_hat(q, 0.0).value == pytest.approx(0.8646647167633872, rel=1e-14)
    dec = f_hat_decomposition(q, 0.0)
    assert dec.A == pytest.approx(-math.exp(-2), rel=1e-13)
    assert dec.B == pytest.approx(-1.0, rel=1e-13)


@pytest.mark.parametrize("alpha,lam", [(-1, 0.5), (1, 2), (-3, 1), (-2, -0.3), (2, 5)])
def test_ode_residuals_second_order(alpha, lam):
    q = query(alpha, lam)
    res = [ode_residual(q, n).max for n in (64, 128, 256, 512)]
    ratios = [a / b for a, b in zip(res, res[1:])]
    assert all(3.5 <= r <= 4.5 for r in ratios), ratios
    assert res[-1] < 2e-5


@given(st.floats(-8, 8), st.floats(-8, 8), st.floats(0.05, 10), st.floats(0, 1))
def test_increasing_in_alpha(a1, a2, lam, x):
    assume(abs(a1 - a2) > 1e-6)
    lo, hi = sorted((a1, a2))
    assume(lam > big_v(hi, B1).value + 1e-3)
    assert f_hat(query(lo, lam), x).value < f_hat(query(hi, lam), x).value


@given(st.floats(-50, 0), st.floats(1e-4, 50), st.floats(0, 1))
def test_mgf_of_nonpositive_tilt_is_a_probability_weight(alpha, lam, x):
    m = lam * f_hat(query(alpha, lam), x).value
    assert 0 < m <= 1 + 1e-12


@given(st.floats(1e-3, 50), st.floats(0, 1))
def test_zero_tilt_gives_one_over_lambda(lam, x):
    assert lam * f_hat(query(0.0, lam), x).value == pytest.approx(1.0, rel=1e-14)


def test_hitting_laplace():
    assert hitting_laplace(B1, 2.0, 0.0) == 1.0
    s = 2.0
    assert hitting_laplace(B1, 2.0, 1.0) == pytest.approx(1 / math.cosh(s), rel=1e-14)
    # stays bounded where cosh itself overflows
    assert 0 <= hitting_laplace(ReflectionParams(1e3), 1e4, 1e3) < 1e-300
    with pytest.raises(DomainError):
        hitting_laplace(B1, 0.0, 0.5)


def test_pole_region_stays_finite():
    p = ReflectionParams(50.0)
    q = MgfQuery(p, 400.0, 3.0)
    vals = [f_hat(q, x).value for x in np.linspace(0, 50, 11)]
    assert all(math.isfinite(v) and v > 0 for v in vals)
    with pytest.raises(OverflowError):
        f_hat_decomposition(q, 10.0)


@pytest.mark.parametrize("alpha", [-2.0, -0.5])
@pytest.mark.parametrize("x", [0.0, 0.3, 1.0])
def test_small_lambda_limit(alpha, x):
    b = 1.0
    limit = -2 * b / alpha + 2 * b * x - x * x
    for lam in (1e-12, -1e-12, 1e-9):
        v = f_hat(query(alpha, lam), x)
        assert not v.stable_form_used
        assert v.value == pytest.approx(limit, rel=1e-8)


@pytest.mark.parametrize("alpha", [-2.0, -0.5])
def test_small_lambda_window_edge_is_seamless(alpha):
    edge = SMALL_LAMBDA
    for x in (0.0, 0.5, 1.0):
        inside = f_hat(query(alpha, edge * (1 - 1e-9)), x)
        outside = f_hat(query(alpha, edge * (1 + 1e-9)), x)
        assert not inside.stable_form_used and outside.stable_form_used
        assert inside.value == pytest.approx(outside.value, rel=1e-7)


def test_domain_checks():
    with pytest.raises(DomainError):
        query(1.0, big_v(1.0, B1).value)
    with pytest.raises(DomainError):
        query(1.0, 0.0)
    with pytest.raises(DomainError):
        f_hat(query(-1.0, 0.5), 1.5)
    with pytest.raises(DomainError):
        ode_residual(query(-1.0, 0.5), 8)
    with pytest.raises(DomainError):
        f_hat_decomposition(query(-1.0, -0.2), 0.5)
    assert query(-1.0, 0.5).domain_margin == pytest.approx(0.5 - big_v(-1.0, B1).value)


def test_negative_lambda_matches_literal_continuation():
    # lam in (V(alpha), 0): write the two-exponential form with imaginary s
    alpha, lam, b = -2.0, -0.4, 1.0
    q = query(alpha, lam, b)
    y = math.sqrt(-2 * lam)
    for x in (0.0, 0.4, 1.0):
        expected = 1 / lam + math.cos((b - x) * y) / math.cos(b * y) * alpha / (lam * (-y * math.tan(b * y) - alpha))
        assert f_hat(q, x).value == pytest.approx(expected, rel=1e-13)
