"""Counter-free per-path random streams.

Every path owns a SplitMix64 generator whose starting state is a pure
function of ``(seed, path_index, substream)``::

    key   = mix64(seed + GOLDEN * (substream + 1))
    state = mix64(key ^ mix64(path_index + GOLDEN))

where ``mix64`` is the SplitMix64 finalizer (Stafford variant 13). Paths can
therefore be regenerated in isolation and in any order, which is what makes
the parallel reductions in :mod:`reflocal.simulator` independent of the
thread count.

Substreams in use:

* ``GAUSS`` - Brownian increments.
* ``HORIZON`` - exponential horizons, so changing ``dt`` never moves a horizon.
* ``BRIDGE`` - uniforms for the Brownian-bridge extrema of the bridge scheme,
  so the Brownian increments are shared between schemes.
"""

import math

import numba
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

GAUSS = 0
HORIZON = 1
BRIDGE = 2


@numba.njit(cache=True, inline="always")
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(cache=True)
def stream_state(seed, path_index, substream):
    """Initial SplitMix64 state for one (seed, path, substream) triple."""
    key = mix64(np.uint64(seed) + GOLDEN * np.uint64(substream + 1))
    return mix64(key ^ mix64(np.uint64(path_index) + GOLDEN))


@numba.njit(cache=True, inline="always")
def next_uniform(state):
    """Advance ``state`` and return ``(new_state, u)`` with u in (0, 1)."""
    state = state + GOLDEN
    z = mix64(state)
    u = (np.float64(z >> _S11) + 0.5) * _INV53
    return state, u


def _ziggurat_tables():
    """Marsaglia-Tsang tables for 256 layers, 52-bit mantissa variant."""
    dn = ZIG_R
    vn = 4.92867323399e-3
    m1 = 2.0**52
    ki = np.zeros(256, dtype=np.uint64)
    wi = np.zeros(256)
    fi = np.zeros(256)
    q = vn / math.exp(-0.5 * dn * dn)
    ki[0] = np.uint64((dn / q) * m1)
    ki[1] = 0
    wi[0] = q / m1
    wi[255] = dn / m1
    fi[0] = 1.0
    fi[255] = math.exp(-0.5 * dn * dn)
    for i in range(254, 0, -1):
        dn_next = math.sqrt(-2.0 * math.log(vn / dn + math.exp(-0.5 * dn * dn)))
        ki[i + 1] = np.uint64((dn_next / dn) * m1)
        dn = dn_next
        fi[i] = math.exp(-0.5 * dn * dn)
        wi[i] = dn / m1
    return ki, wi, fi


ZIG_R = 3.6541528853610088
_ZIG_INV_R = 1.0 / ZIG_R
_ZIG_KI, _ZIG_WI, _ZIG_FI = _ziggurat_tables()
_MASK52 = np.uint64(0x000FFFFFFFFFFFFF)
_MASK8 = np.uint64(0xFF)
_ONE = np.uint64(1)
_S8 = np.uint64(8)


@numba.njit(cache=True, inline="always")
def next_u64(state):
    state = state + GOLDEN
    return state, mix64(state)


@numba.njit(cache=True)
def next_normal(state):
    """Ziggurat standard normal; returns ``(new_state, z)``."""
    while True:
        state, r = next_u64(state)
        idx = np.intp(r & _MASK8)
        r = r >> _S8
        negative = (r & _ONE) == _ONE
        rabs = (r >> _ONE) & _MASK52
        x = np.float64(rabs) * _ZIG_WI[idx]
        if negative:
            x = -x
        if rabs < _ZIG_KI[idx]:
            return state, x
        if idx == 0:
            # base layer: sample the tail beyond ZIG_R
            while True:
                state, u1 = next_uniform(state)
                state, u2 = next_uniform(state)
                xx = -_ZIG_INV_R * math.log(u1)
                yy = -math.log(u2)
                if yy + yy > xx * xx:
                    if negative:
                        return state, -(ZIG_R + xx)
                    return state, ZIG_R + xx
        else:
            state, u = next_uniform(state)
            if (_ZIG_FI[idx - 1] - _ZIG_FI[idx]) * u + _ZIG_FI[idx] < math.exp(-0.5 * x * x):
                return state, x


def py_stream_state(seed: int, path_index: int, substream: int) -> int:
    """Pure-Python twin of :func:`stream_state`, used to pin the mixing function in tests."""
    mask = (1 << 64) - 1

    def _mix(z: int) -> int:
        z &= mask
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        return z ^ (z >> 31)

    key = _mix(seed + 0x9E3779B97F4A7C15 * (substream + 1))
    return _mix(key ^ _mix(path_index + 0x9E3779B97F4A7C15))
