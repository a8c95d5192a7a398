"""Resolvent moment generating function of the local time at zero.

For ``tau ~ Exp(lam)`` independent of the motion,

    f_hat(x; lam, alpha) = E_x[exp(alpha L_tau)] / lam
                         = int_0^inf exp(-lam t) E_x[exp(alpha L_t)] dt.

The textbook solution is ``1/lam + exp(x s) A + exp(-x s) B`` with
``s = sqrt(2 lam)``. Summing the two exponentials gives the equivalent form

    f_hat = 1/lam + R(x) * alpha / (lam (alpha*(lam) - alpha)),
    R(x)  = cosh((b - x) s) / cosh(b s),

where ``R`` is the Laplace transform of the hitting time of 0 and never
exceeds 1, so nothing overflows. ``R`` continues to ``lam < 0`` as
``cos((b - x) y) / cos(b y)`` with ``y = sqrt(-2 lam)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core_math import alpha_star, big_v
from .errors import DomainError
from .params import ReflectionParams

# |lam| below SMALL_LAMBDA * max(1, 1/b^2) uses the cancellation-free expansion.
SMALL_LAMBDA = 1e-6
# Literal A/B form overflows beyond this b*sqrt(2 lam).
LITERAL_LIMIT = 300.0
_Z2_SERIES = 1e-6


def _shc(z2: float) -> float:
    """``sinh(z)/z`` as a function of ``z^2`` (``sin(y)/y`` for ``z^2 = -y^2``)."""
    if abs(z2) < _Z2_SERIES:
        return 1.0 + z2 / 6.0 * (1.0 + z2 / 20.0 * (1.0 + z2 / 42.0 * (1.0 + z2 / 72.0)))
    if z2 > 0:
        z = math.sqrt(z2)
        return math.sinh(z) / z
    y = math.sqrt(-z2)
    return math.sin(y) / y


def _thc(z2: float) -> float:
    """``tanh(z)/z`` as a function of ``z^2``."""
    if abs(z2) < _Z2_SERIES:
        return 1.0 - z2 / 3.0 + 2.0 * z2 * z2 / 15.0 - 17.0 * z2**3 / 315.0
    if z2 > 0:
        z = math.sqrt(z2)
        return math.tanh(z) / z
    y = math.sqrt(-z2)
    return math.tan(y) / y


def _ch(z2: float) -> float:
    """``cosh(z)`` as a function of ``z^2``."""
    if z2 >= 0:
        return math.cosh(math.sqrt(z2))
    return math.cos(math.sqrt(-z2))


def _margin(alpha: float, p: ReflectionParams) -> float:
    return 1e-9 * max(1.0, abs(_v_or_floor(alpha, p)))


def _v_or_floor(alpha: float, p: ReflectionParams) -> float:
    try:
        return big_v(alpha, p).value
    except DomainError:
        if alpha < 0:
            # alpha so negative that V sits within the domain guard of its floor
            return p.lambda_floor
        raise


@dataclass(frozen=True)
class MgfQuery:
    """A point ``(lam, alpha)`` where the resolvent is finite, i.e. ``lam > V(alpha)``."""

    params: ReflectionParams
    lam: float
    alpha: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and math.isfinite(self.alpha)):
            raise DomainError("lam and alpha must be finite")
        v = _v_or_floor(self.alpha, self.params)
        if not self.lam > v + _margin(self.alpha, self.params):
            raise DomainError(
                f"lam={self.lam!r} not above V(alpha={self.alpha!r})={v!r}; the transform diverges"
            )

    @property
    def domain_margin(self) -> float:
        return self.lam - _v_or_floor(self.alpha, self.params)


@dataclass(frozen=True)
class MgfValue:
    """``value`` is ``f_hat`` itself; ``lam * value`` is the MGF of ``L_tau``.

    ``stable_form_used`` is False only inside the small-``lam`` window, where
    the removable singularity at ``lam = 0`` is expanded out.
    """

    value: float
    stable_form_used: bool
    domain_margin: float


def _check_x(x: float, b: float) -> None:
    if not (0.0 <= x <= b):
        raise DomainError(f"x={x!r} outside [0, {b!r}]")


def _cosh_ratio(lam: float, x: float, b: float) -> float:
    if lam > 0:
        s = math.sqrt(2.0 * lam)
        return math.exp(-x * s) * (1.0 + math.exp(-2.0 * (b - x) * s)) / (1.0 + math.exp(-2.0 * b * s))
    if lam < 0:
        y = math.sqrt(-2.0 * lam)
        return math.cos((b - x) * y) / math.cos(b * y)
    return 1.0


def hitting_laplace(params: ReflectionParams, lam: float, x: float) -> float:
    """``E_x exp(-lam H_0)`` for the hitting time ``H_0`` of zero."""
    if not (lam > 0):
        raise DomainError(f"lam must be positive, got {lam!r}")
    _check_x(x, params.b)
    return _cosh_ratio(lam, x, params.b)


def f_hat(q: MgfQuery, x: float) -> MgfValue:
    """Evaluate the resolvent ``f_hat(x; lam, alpha)``."""
    p = q.params
    b = p.b
    lam, alpha = q.lam, q.alpha
    _check_x(x, b)
    a_star = alpha_star(lam, p)
    gap = a_star - alpha
    if abs(lam) < SMALL_LAMBDA * max(1.0, 1.0 / (b * b)):
        # f_hat = [alpha*/lam + alpha (R - 1)/lam] / (alpha* - alpha), all terms O(1)
        sigma = 2.0 * lam
        half_far = 0.5 * (2.0 * b - x)
        half_near = 0.5 * x
        a_over_lam = 2.0 * b * _thc(b * b * sigma)
        r_minus_one = -4.0 * half_far * half_near * _shc(half_far**2 * sigma) * _shc(half_near**2 * sigma)
        r_minus_one /= _ch(b * b * sigma)
        value = (a_over_lam + alpha * r_minus_one) / gap
        return MgfValue(value, False, q.domain_margin)
    r = _cosh_ratio(lam, x, b)
    value = 1.0 / lam + r * alpha / (lam * gap)
    return MgfValue(value, True, q.domain_margin)


def f_hat_zero(q: MgfQuery) -> float:
    """``f_hat(0) = alpha* / (lam (alpha* - alpha))``."""
    return f_hat(q, 0.0).value


@dataclass(frozen=True)
class Decomposition:
    A: float
    B: float
    direct_value: float


def f_hat_decomposition(q: MgfQuery, x: float) -> Decomposition:
    """Coefficients of ``exp(+-x sqrt(2 lam))`` and the literal two-exponential sum.

    Only defined for ``lam > 0``; raises ``OverflowError`` once
    ``b sqrt(2 lam) > 300`` where the literal form is unusable.
    """
    p = q.params
    b = p.b
    if not q.lam > max(0.0, _v_or_floor(q.alpha, p)) + _margin(q.alpha, p):
        raise DomainError("literal decomposition needs lam > max(V(alpha), 0)")
    _check_x(x, b)
    s = math.sqrt(2.0 * q.lam)
    if b * s > LITERAL_LIMIT:
        raise OverflowError(f"b*sqrt(2 lam) = {b * s:.4g} > {LITERAL_LIMIT}; use f_hat")
    gap = alpha_star(q.lam, p) - q.alpha
    A = q.alpha * math.exp(-b * s) / math.cosh(b * s) / (2.0 * q.lam * gap)
    B = math.exp(2.0 * s * b) * A
    direct = 1.0 / q.lam + math.exp(x * s) * A + math.exp(-x * s) * B
    return Decomposition(A, B, direct)


@dataclass(frozen=True)
class OdeResidual:
    """Finite-difference residuals of the boundary-value problem solved by ``f_hat``."""

    grid_n: int
    interior: float
    lower_bc: float
    upper_bc: float

    @property
    def max(self) -> float:
        return max(self.interior, self.lower_bc, self.upper_bc)


def f_hat_grid(q: MgfQuery, xs) -> np.ndarray:
    return np.array([f_hat(q, float(x)).value for x in xs])


def ode_residual(q: MgfQuery, grid_n: int) -> OdeResidual:
    """Residuals of ``f''/2 = lam f - 1``, ``f'(0) + alpha f(0) = 0``, ``f'(b) = 0``.

    Second differences in the interior and one-sided second-order first
    differences at the ends; every residual is ``O(h^2)``.
    """
    if int(grid_n) != grid_n or grid_n < 16:
        raise DomainError(f"grid_n must be an integer >= 16, got {grid_n!r}")
    b = q.params.b
    h = b / grid_n
    xs = np.linspace(0.0, b, grid_n + 1)
    xs[-1] = b
    f = f_hat_grid(q, xs)
    fxx = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h**2
    interior = float(np.max(np.abs(0.5 * fxx - q.lam * f[1:-1] + 1.0)))
    fx0 = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    fxb = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return OdeResidual(int(grid_n), interior, float(abs(fx0 + q.alpha * f[0])), float(abs(fxb)))
