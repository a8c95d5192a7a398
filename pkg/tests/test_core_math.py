import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from reflocal import ReflectionParams, alpha_star, alpha_star_prime, big_v, lambda_star, scaling_check, v_star
from reflocal.core_math import alpha_star_second
from reflocal.errors import DomainError
from reflocal.experiments import legendre_grid

mp.mp.dps = 40
B1 = ReflectionParams(1.0)


def mp_alpha_star(lam, b):
    lam = mp.mpf(lam)
    if lam >= 0:
        s = mp.sqrt(2 * lam)
        return s * mp.tanh(b * s)
    s = mp.sqrt(-2 * lam)
    return -s * mp.tan(b * s)


def mp_big_v(alpha, b):
    lo = -mp.pi**2 / (8 * b * b) * (1 - mp.mpf(10) ** -30)
    hi = mp.mpf(1)
    while mp_alpha_star(hi, b) < alpha:
        hi *= 2
    return mp.findroot(lambda l: mp_alpha_star(l, b) - alpha, (lo, hi), solver="anderson")


def mp_v_star(x, b):
    floor = -mp.pi**2 / (8 * b * b)
    bracket = (floor * (1 - mp.mpf(10) ** -20), 0) if x < 1 / (2 * b) else (0, 100)
    lam = mp.findroot(lambda l: mp.diff(lambda u: mp_alpha_star(u, b), l) - 1 / mp.mpf(x), bracket,
                      solver="anderson")
    return x * mp_alpha_star(lam, b) - lam


lam_b1 = st.floats(min_value=-1.2, max_value=50.0, allow_nan=False)
bs = st.sampled_from([0.5, 1.0, 2.0])


# --------------------------------------------------------------------------- oracle values


@pytest.mark.parametrize("lam", [-1.2, -0.5, -1e-9, 0.0, 1e-9, 0.5, 2.0, 30.0])
def test_alpha_star_against_mpmath(lam):
    assert alpha_star(lam, B1) == pytest.approx(float(mp_alpha_star(lam, 1)), rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("lam", [-1.0, -1e-10, 1e-10, 0.5, 3.0, 200.0])
def test_derivatives_against_mpmath(lam):
    d1 = float(mp.diff(lambda u: mp_alpha_star(u, 1), lam))
    d2 = float(mp.diff(lambda u: mp_alpha_star(u, 1), lam, 2))
    assert alpha_star_prime(lam, B1) == pytest.approx(d1, rel=1e-11)
    assert alpha_star_second(lam, B1) == pytest.approx(d2, rel=1e-8)


def test_alpha_star_prime_known_value():
    # d/dlam [sqrt(2 lam) tanh(sqrt(2 lam))] at lam = 1/2
    assert alpha_star_prime(0.5, B1) == pytest.approx(1.18156849757, abs=1e-10)


@pytest.mark.parametrize("alpha,b", [(-5.0, 1.0), (0.5, 1.0), (2.0, 0.5), (-20.0, 2.0), (7.0, 2.0)])
def test_big_v_against_mpmath(alpha, b):
    assert big_v(alpha, ReflectionParams(b)).value == pytest.approx(float(mp_big_v(alpha, b)), rel=1e-11, abs=1e-13)


def test_big_v_known_values():
    assert big_v(-5.0, B1).value == pytest.approx(-0.8630847726, abs=1e-9)
    assert big_v(0.5, B1).value == pytest.approx(0.2977622347, abs=1e-9)


@pytest.mark.parametrize("x,expected", [(0.8, 0.111113059), (0.2, 0.188520776), (1.0, 0.28038558)])
def test_v_star_known_values(x, expected):
    assert v_star(x, B1).value == pytest.approx(expected, abs=1e-8)
    assert v_star(x, B1).value == pytest.approx(float(mp_v_star(x, 1)), rel=1e-9)


# --------------------------------------------------------------------------- exact constants


@pytest.mark.parametrize("b", [0.5, 1.0, 2.0])
def test_exact_constants(b):
    p = ReflectionParams(b)
    assert big_v(0.0, p).value == 0.0
    assert big_v(0.0, p).derivative == pytest.approx(1 / (2 * b), rel=1e-15)
    r = v_star(1 / (2 * b), p)
    assert abs(r.value) < 1e-10 and abs(r.derivative) < 1e-10 and abs(r.lambda_star) < 1e-10
    r0 = v_star(0.0, p)
    assert r0.value == pytest.approx(math.pi**2 / (8 * b * b), rel=1e-12)
    assert r0.derivative is None and r0.lambda_star is None


# --------------------------------------------------------------------------- properties


@given(lam_b1, lam_b1)
def test_alpha_star_increasing(l1, l2):
    assume(abs(l1 - l2) > 1e-9)
    lo, hi = sorted((l1, l2))
    assert alpha_star(lo, B1) < alpha_star(hi, B1)


@given(lam_b1, lam_b1, st.floats(0.05, 0.95))
def test_alpha_star_concave(l1, l2, w):
    assume(abs(l1 - l2) > 1e-3)
    mid = w * l1 + (1 - w) * l2
    chord = w * alpha_star(l1, B1) + (1 - w) * alpha_star(l2, B1)
    assert alpha_star(mid, B1) >= chord - 1e-12 * (1 + abs(chord))


@given(st.floats(-1.2, 50.0), bs)
def test_roundtrip(lam_scaled, b):
    p = ReflectionParams(b)
    lam = lam_scaled / b**2
    a = alpha_star(lam, p)
    assert big_v(a, p).value == pytest.approx(lam, abs=1e-10 * max(1, abs(lam)))


@given(st.floats(-30, 30), st.floats(-30, 30), st.floats(0.05, 0.95))
def test_big_v_convex(a1, a2, w):
    assume(abs(a1 - a2) > 1e-3)
    mid = big_v(w * a1 + (1 - w) * a2, B1).value
    assert mid <= w * big_v(a1, B1).value + (1 - w) * big_v(a2, B1).value + 1e-12


@given(st.floats(-30, 30), st.floats(0.0, 5.0))
def test_young_inequality(alpha, x):
    assert alpha * x <= big_v(alpha, B1).value + v_star(x, B1).value + 1e-10


@given(st.floats(0.05, 5.0))
def test_v_star_derivative_matches_lambda_star(x):
    r = v_star(x, B1)
    assert r.derivative == pytest.approx(alpha_star(r.lambda_star, B1), rel=1e-12)
    assert alpha_star_prime(r.lambda_star, B1) == pytest.approx(1 / x, rel=1e-10)


@given(st.floats(0.1, 10.0), st.floats(-1.2, 20.0))
def test_brownian_scaling(c, lam_scaled):
    lam = lam_scaled / c**2
    left, right = scaling_check(c, lam, B1)
    assert left == pytest.approx(right, rel=1e-11, abs=1e-14)


@pytest.mark.parametrize("b", [0.5, 1.0, 2.0])
def test_branch_continuity_at_zero(b):
    p = ReflectionParams(b)
    f = lambda u: mp_alpha_star(u, b)  # noqa: E731
    for k in range(4, 13):
        for lam in (-(10.0**-k), 10.0**-k):
            assert alpha_star(lam, p) == pytest.approx(float(f(lam)), rel=1e-13)
            assert alpha_star_prime(lam, p) == pytest.approx(float(mp.diff(f, lam)), rel=1e-12)
            assert alpha_star_second(lam, p) == pytest.approx(float(mp.diff(f, lam, 2)), rel=1e-7)


def test_series_boundary_seamless():
    w_edge = 1e-8
    for lam in (w_edge / 2 * (1 - 1e-6), w_edge / 2 * (1 + 1e-6)):
        assert alpha_star(lam, B1) == pytest.approx(float(mp_alpha_star(lam, 1)), rel=1e-14)
        assert alpha_star(-lam, B1) == pytest.approx(float(mp_alpha_star(-lam, 1)), rel=1e-14)


def test_legendre_grid_agrees_with_closed_form():
    alphas = np.linspace(-60, 12, 4001)
    assert legendre_grid(B1, 0.8, alphas) == pytest.approx(v_star(0.8, B1).value, abs=1e-4)


def test_domain_errors():
    with pytest.raises(DomainError):
        alpha_star(-math.pi**2 / 8, B1)
    with pytest.raises(DomainError):
        alpha_star(float("nan"), B1)
    with pytest.raises(DomainError):
        big_v(float("inf"), B1)
    with pytest.raises(DomainError):
        v_star(-0.1, B1)
    with pytest.raises(DomainError):
        lambda_star(0.0, B1)
    with pytest.raises(DomainError):
        ReflectionParams(0.0)


def test_extreme_alphas_stay_finite():
    v = big_v(-1e6, B1).value
    assert B1.lambda_floor < v < B1.lambda_floor + 1e-5
    assert big_v(1e6, B1).value == pytest.approx(0.5e12, rel=1e-5)
