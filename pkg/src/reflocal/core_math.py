"""Pole locus of the resolvent, its inverse (the scaled cumulant) and the rate function.

``alpha_star(lam) = sqrt(2 lam) * tanh(b sqrt(2 lam))`` for ``lam >= 0``,
continued analytically to ``(-pi^2/(8 b^2), 0)`` as
``-sqrt(-2 lam) * tan(b sqrt(-2 lam))`` (``tanh(i y) = i tan(y)``). It is
smooth, strictly increasing and strictly concave on that whole interval and
maps it onto the real line. ``big_v`` inverts it, and ``v_star`` is the
Legendre transform of ``big_v``.
"""

import math
from dataclasses import dataclass
from typing import Optional

from .errors import ConvergenceError, DomainError
from .params import ReflectionParams

TOL_ROOT = 1e-12
MAX_ITER = 200
# Below this |u| = b sqrt(2|lam|) the Taylor series in u^2 is used.
SERIES_U = 1e-4

# alpha*/(2 b lam) = g(w), w = 2 b^2 lam
_G = (1.0, -1.0 / 3.0, 2.0 / 15.0, -17.0 / 315.0, 62.0 / 2835.0)
# d/dlam alpha* / (2 b) = g(w) + w g'(w)
_GP = tuple((k + 1) * c for k, c in enumerate(_G))


def domain_guard(b: float) -> float:
    return 1e-9 * math.pi**2 / (8.0 * b * b)


def _params(params) -> ReflectionParams:
    if isinstance(params, ReflectionParams):
        return params
    return ReflectionParams(float(params))


def _check_lambda(lam: float, b: float) -> None:
    floor = -math.pi**2 / (8.0 * b * b)
    if not (lam > floor + domain_guard(b)) or math.isnan(lam):
        raise DomainError(f"lambda={lam!r} not above the pole-locus floor {floor!r} for b={b!r}")


def _poly(coeffs, w: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * w + c
    return acc


def alpha_star(lam: float, params) -> float:
    """Pole locus ``alpha*(lam)``, real-analytic on ``(-pi^2/(8 b^2), inf)``.

    >>> round(alpha_star(0.5, ReflectionParams(1.0)), 10)
    0.761594156
    """
    b = _params(params).b
    lam = float(lam)
    _check_lambda(lam, b)
    w = 2.0 * b * b * lam
    if abs(w) < SERIES_U**2:
        return 2.0 * b * lam * _poly(_G, w)
    if lam > 0:
        s = math.sqrt(2.0 * lam)
        return s * math.tanh(b * s)
    s = math.sqrt(-2.0 * lam)
    return -s * math.tan(b * s)


def alpha_star_prime(lam: float, params) -> float:
    """Derivative of :func:`alpha_star`; positive everywhere, ``2b`` at zero."""
    b = _params(params).b
    lam = float(lam)
    _check_lambda(lam, b)
    w = 2.0 * b * b * lam
    if abs(w) < SERIES_U**2:
        return 2.0 * b * _poly(_GP, w)
    if lam > 0:
        u = b * math.sqrt(2.0 * lam)
        if u > 350.0:
            return b / u * (1.0 + 4.0 * u * math.exp(-2.0 * u))
        sech = 1.0 / math.cosh(u)
        return b / u * (math.tanh(u) + u * sech * sech)
    u = b * math.sqrt(-2.0 * lam)
    sec = 1.0 / math.cos(u)
    return b / u * (math.tan(u) + u * sec * sec)


def alpha_star_second(lam: float, params) -> float:
    """Second derivative of :func:`alpha_star`; negative everywhere."""
    b = _params(params).b
    lam = float(lam)
    _check_lambda(lam, b)
    w = 2.0 * b * b * lam
    if abs(w) < SERIES_U**2:
        return 4.0 * b**3 * sum(k * c * w ** (k - 1) for k, c in enumerate(_GP) if k)
    if lam > 0:
        u = b * math.sqrt(2.0 * lam)
        if u > 350.0:
            return -(b**3) / u**3
        sech2 = 1.0 / math.cosh(u) ** 2
        th = math.tanh(u)
        g1 = sech2 / u - th / (u * u) - 2.0 * sech2 * th
        return b**3 * g1 / u
    u = b * math.sqrt(-2.0 * lam)
    sec2 = 1.0 / math.cos(u) ** 2
    tn = math.tan(u)
    h1 = sec2 / u - tn / (u * u) + 2.0 * sec2 * tn
    return -(b**3) * h1 / u


@dataclass(frozen=True)
class RateEval:
    """``(V, V')`` at an alpha, or ``(V*, V*', lambda*)`` at an x.

    ``derivative`` and ``lambda_star`` are ``None`` where they do not exist
    (``V*`` at ``x = 0``) or do not apply (``V`` queries carry no ``lambda_star``).
    """

    point: float
    value: float
    derivative: Optional[float]
    lambda_star: Optional[float] = None


def _newton_bisect(f, fprime, lo: float, hi: float, x0: float, scale: float, what: str) -> float:
    """Root of increasing ``f`` on ``[lo, hi]``; Newton with a bisection fallback."""
    x = min(max(x0, lo), hi)
    for _ in range(MAX_ITER):
        fx = f(x)
        if abs(fx) <= TOL_ROOT * scale:
            return x
        if fx > 0:
            hi = x
        else:
            lo = x
        step = fx / fprime(x)
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * max(1.0, abs(x)) or x_new == x:
            return x_new
        x = x_new
    raise ConvergenceError(f"{what}: no convergence in {MAX_ITER} iterations")


def _upper_bracket(g, target: float) -> float:
    hi = 1.0
    while g(hi) <= target:
        hi *= 2.0
        if hi > 1e300:
            raise ConvergenceError("could not bracket root")
    return hi


def big_v(alpha: float, params) -> RateEval:
    """Inverse of the pole locus: the ``lam`` with ``alpha_star(lam) == alpha``.

    Equals the limiting scaled cumulant ``lim (1/t) log E exp(alpha L_t)``.
    """
    p = _params(params)
    b = p.b
    alpha = float(alpha)
    if not math.isfinite(alpha):
        raise DomainError(f"alpha must be finite, got {alpha!r}")
    if alpha == 0.0:
        return RateEval(0.0, 0.0, 1.0 / (2.0 * b))
    lo = p.lambda_floor + 2.0 * domain_guard(b)
    if alpha <= alpha_star(lo, p):
        raise DomainError(f"alpha={alpha!r} below the resolvable range for b={b!r}")
    if alpha > 0:
        lo = 0.0
        hi = _upper_bracket(lambda l: alpha_star(l, p), alpha)
    else:
        hi = 0.0
    x0 = alpha / (2.0 * b)
    lam = _newton_bisect(
        lambda l: alpha_star(l, p) - alpha,
        lambda l: alpha_star_prime(l, p),
        lo, hi, x0, max(1.0, abs(alpha)), "big_v",
    )
    return RateEval(alpha, lam, 1.0 / alpha_star_prime(lam, p))


def lambda_star(x: float, params) -> float:
    """The unique ``lam`` with ``alpha_star_prime(lam) == 1/x``, for ``x > 0``."""
    p = _params(params)
    b = p.b
    x = float(x)
    if not (x > 0) or not math.isfinite(x):
        raise DomainError(f"x must be positive, got {x!r}")
    target = 1.0 / x
    if target == 2.0 * b:
        return 0.0
    # alpha_star_prime is strictly decreasing, so the root is unique
    if target < 2.0 * b:
        lo = 0.0
        hi = 1.0
        while alpha_star_prime(hi, p) > target:
            hi *= 4.0
            if hi > 1e300:
                raise ConvergenceError("lambda_star: could not bracket")
    else:
        lo = p.lambda_floor + 2.0 * domain_guard(b)
        hi = 0.0
        if alpha_star_prime(lo, p) <= target:
            raise DomainError(f"x={x!r} too close to 0 to resolve lambda* for b={b!r}")

    lam = _newton_bisect(
        lambda l: target - alpha_star_prime(l, p),
        lambda l: -alpha_star_second(l, p),
        lo, hi, 0.5 * (lo + hi) if target > 2.0 * b else 1.0 / (2.0 * target * target),
        target, "lambda_star",
    )
    return lam


def v_star(x: float, params) -> RateEval:
    """Legendre transform of :func:`big_v`, the large-deviation rate of ``L_t/t``."""
    p = _params(params)
    x = float(x)
    if not (x >= 0) or not math.isfinite(x):
        raise DomainError(f"x must be nonnegative, got {x!r}")
    if x == 0.0:
        return RateEval(0.0, math.pi**2 / (8.0 * p.b**2), None, None)
    try:
        lam = lambda_star(x, p)
    except DomainError:
        if not x < p.lln_point:
            raise
        # x so small that lambda* sits inside the floor guard; the bracket end
        # gives V* to within ~1e-9 relative
        lam = p.lambda_floor + 2.0 * domain_guard(p.b)
    a = alpha_star(lam, p)
    return RateEval(x, max(x * a - lam, 0.0), a, lam)


def scaling_check(c: float, lam: float, params) -> tuple[float, float]:
    """Both sides of ``alpha*_{cb}(lam) == alpha*_b(c^2 lam) / c`` (Brownian scaling)."""
    p = _params(params)
    if not (c > 0):
        raise DomainError(f"scale c must be positive, got {c!r}")
    left = alpha_star(lam, ReflectionParams(c * p.b))
    right = alpha_star(c * c * lam, p) / c
    return left, right
