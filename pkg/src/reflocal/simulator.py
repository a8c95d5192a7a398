"""Monte-Carlo engine for Brownian motion reflected at 0 and b.

Paths follow the two-sided Skorokhod recursion on a uniform grid. Each step
draws a free Gaussian increment, pushes the state up at 0 (regulator ``L``)
and down at ``b`` (regulator ``U``), in that order. Two schemes are offered:

``"clamp"``
    The plain recursion ``dL = max(0, -Y)``, ``dU = max(0, Y' - b)``. Local
    time is underestimated by ``O(sqrt(dt))`` per excursion and the state
    picks up atoms at the barriers.

``"bridge"`` (default)
    Same increments, but the push at a barrier is computed from the exact
    extremum of the Brownian bridge over the step, which makes each step an
    exact draw of one-sided reflected motion. The only residual error comes
    from steps that feel both barriers, whose probability is of order
    ``exp(-b^2 / (2 dt))``.

All streams come from :mod:`reflocal.rng`; per-path values are a pure
function of ``(seed, path_index)`` and reductions run over a fixed path
order, so estimates do not depend on the thread count.
"""

import math
import os
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Iterator, Sequence

import numba
import numpy as np
from numba import prange

from . import rng
from .errors import ConfigError, UnknownFunctional
from .params import ReflectionParams

if "NUMBA_THREADING_LAYER" not in os.environ:
    # skip TBB, which warns on older installs; results do not depend on the layer
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

SCHEMES = {"clamp": 0, "bridge": 1}
MAX_STEPS = 1_000_000_000
# Bridge pushes with log-probability below -_BRIDGE_CUTOFF are skipped (p < 4e-18).
_BRIDGE_CUTOFF = 40.0
# Cap on doubles held by one block of recorded paths.
_BLOCK_BUDGET = 1 << 23


# ---------------------------------------------------------------------------
# kernels


@numba.njit(cache=True, inline="always")
def _reflect(x, w, b, h, scheme, bstate):
    """One reflected step of length ``h`` from ``x`` with free increment ``w``."""
    y = x + w
    dl = 0.0
    du = 0.0
    if scheme == 1:
        # lower barrier: P(min of bridge < -x) = exp(-2 x (x + w) / h)
        e = 2.0 * x * y / h
        if y <= 0.0 or e < _BRIDGE_CUTOFF:
            bstate, v = rng.next_uniform(bstate)
            if y <= 0.0 or v < math.exp(-e):
                depth = 0.5 * (-w + math.sqrt(w * w - 2.0 * h * math.log(v)))
                if depth > x:
                    dl = depth - x
        gap = b - x
        e = 2.0 * gap * (gap - w) / h
        if gap - w <= 0.0 or e < _BRIDGE_CUTOFF:
            bstate, v = rng.next_uniform(bstate)
            if gap - w <= 0.0 or v < math.exp(-e):
                height = 0.5 * (w + math.sqrt(w * w - 2.0 * h * math.log(v)))
                if height > gap:
                    du = height - gap
        y = y + dl - du
    # the plain recursion; for the bridge scheme this only fires on steps
    # that feel both barriers
    if y < 0.0:
        dl += -y
        y = 0.0
    if y > b:
        du += y - b
        y = b
    return y, dl, du, bstate


@numba.njit(cache=True)
def _path_full(seed, index, x0, b, dt, n_full, last_h, scheme, X, W, L, U):
    """Fill full trajectories; ``X`` etc. have ``n_full + 1 (+1 if last_h > 0)`` entries."""
    gstate = rng.stream_state(seed, index, rng.GAUSS)
    bstate = rng.stream_state(seed, index, rng.BRIDGE)
    sd = math.sqrt(dt)
    x = x0
    wsum = 0.0
    lsum = 0.0
    usum = 0.0
    X[0] = x
    W[0] = 0.0
    L[0] = 0.0
    U[0] = 0.0
    n_tot = n_full + (1 if last_h > 0.0 else 0)
    for k in range(n_tot):
        gstate, z = rng.next_normal(gstate)
        if k < n_full:
            h = dt
            w = z * sd
        else:
            h = last_h
            w = z * math.sqrt(last_h)
        x, dl, du, bstate = _reflect(x, w, b, h, scheme, bstate)
        wsum += w
        lsum += dl
        usum += du
        X[k + 1] = x
        W[k + 1] = wsum
        L[k + 1] = lsum
        U[k + 1] = usum


@numba.njit(cache=True, parallel=True)
def _paths_recorded(seed, path_start, x0, b, dt, rec_steps, scheme, rX, rL, rU, rI):
    """Simulate ``rL.shape[0]`` paths and record state at the sorted step indices ``rec_steps``.

    ``rI`` receives the trapezoidal time integral of ``X``. Any of the record
    arrays may have zero columns to skip storing it.
    """
    n_paths = rL.shape[0]
    n_rec = rec_steps.shape[0]
    n_steps = rec_steps[n_rec - 1]
    sd = math.sqrt(dt)
    want_x = rX.shape[1] > 0
    want_u = rU.shape[1] > 0
    want_i = rI.shape[1] > 0
    for p in prange(n_paths):
        gstate = rng.stream_state(seed, path_start + p, rng.GAUSS)
        bstate = rng.stream_state(seed, path_start + p, rng.BRIDGE)
        x = x0
        lsum = 0.0
        usum = 0.0
        occ = 0.0
        j = 0
        while j < n_rec and rec_steps[j] == 0:
            if want_x:
                rX[p, j] = x
            rL[p, j] = 0.0
            if want_u:
                rU[p, j] = 0.0
            if want_i:
                rI[p, j] = 0.0
            j += 1
        for k in range(n_steps):
            gstate, z = rng.next_normal(gstate)
            xo = x
            x, dl, du, bstate = _reflect(x, z * sd, b, dt, scheme, bstate)
            lsum += dl
            usum += du
            occ += 0.5 * (xo + x) * dt
            while j < n_rec and rec_steps[j] == k + 1:
                if want_x:
                    rX[p, j] = x
                rL[p, j] = lsum
                if want_u:
                    rU[p, j] = usum
                if want_i:
                    rI[p, j] = occ
                j += 1


@numba.njit(cache=True, parallel=True)
def _paths_exp_horizon(seed, path_start, x0, b, dt, rate, scheme, oX, oL, oU, oT):
    """Simulate each path up to its own exponential horizon; store terminal values."""
    n_paths = oL.shape[0]
    sd = math.sqrt(dt)
    for p in prange(n_paths):
        tstate = rng.stream_state(seed, path_start + p, rng.HORIZON)
        tstate, u = rng.next_uniform(tstate)
        tau = -math.log(u) / rate
        n_full = int(math.floor(tau / dt))
        last_h = tau - n_full * dt
        gstate = rng.stream_state(seed, path_start + p, rng.GAUSS)
        bstate = rng.stream_state(seed, path_start + p, rng.BRIDGE)
        x = x0
        lsum = 0.0
        usum = 0.0
        n_tot = n_full + (1 if last_h > 0.0 else 0)
        for k in range(n_tot):
            gstate, z = rng.next_normal(gstate)
            if k < n_full:
                x, dl, du, bstate = _reflect(x, z * sd, b, dt, scheme, bstate)
            else:
                x, dl, du, bstate = _reflect(x, z * math.sqrt(last_h), b, last_h, scheme, bstate)
            lsum += dl
            usum += du
        oX[p] = x
        oL[p] = lsum
        oU[p] = usum
        oT[p] = tau


@numba.njit(cache=True)
def _exp_horizon_tau(seed, index, rate):
    tstate = rng.stream_state(seed, index, rng.HORIZON)
    tstate, u = rng.next_uniform(tstate)
    return -math.log(u) / rate


# ---------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce a batch of paths bit for bit."""

    params: ReflectionParams
    horizon: float
    dt: float
    n_paths: int
    seed: int = 0
    store_full_paths: bool = False
    scheme: str = "bridge"

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ConfigError(f"horizon must be positive, got {self.horizon!r}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if self.dt > self.horizon:
            raise ConfigError(f"dt={self.dt} exceeds horizon={self.horizon}")
        if self.horizon / self.dt > MAX_STEPS:
            raise ConfigError(f"horizon/dt = {self.horizon / self.dt:.3g} exceeds {MAX_STEPS:.0e} steps")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ConfigError(f"n_paths must be a positive integer, got {self.n_paths!r}")
        if int(self.seed) != self.seed or not (0 <= self.seed < 2**64):
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {sorted(SCHEMES)}, got {self.scheme!r}")
        if self.dt > self.params.b**2 / 4:
            warnings.warn(
                f"dt={self.dt} > b^2/4={self.params.b**2 / 4}; barrier resolution is poor",
                stacklevel=3,
            )

    def replace(self, **changes) -> "SimConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return SimConfig(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = {"b": self.params.b, "x": self.params.x}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        d["params"] = ReflectionParams(**d["params"])
        return cls(**d)


@dataclass
class PathSample:
    """One trajectory on a (possibly truncated) uniform grid.

    ``W`` holds the accumulated free increments, so ``X == x + W + L - U``
    up to rounding at every grid point.
    """

    times: np.ndarray
    X: np.ndarray
    W: np.ndarray
    L: np.ndarray
    U: np.ndarray

    def to_csv(self, path) -> None:
        """Write ``t,X,L,U`` rows with 17 significant digits."""
        with open(path, "w", newline="\n") as fh:
            fh.write("t,X,L,U\n")
            for row in zip(self.times, self.X, self.L, self.U):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def _grid_steps(horizon: float, dt: float) -> tuple[int, float]:
    """Split ``horizon`` into full steps plus a trailing partial step."""
    n_full = int(math.floor(horizon / dt + 1e-9))
    last_h = horizon - n_full * dt
    if last_h <= 1e-9 * dt:
        last_h = 0.0
    return n_full, last_h


def _full_path(cfg: SimConfig, path_index: int, horizon: float) -> PathSample:
    n_full, last_h = _grid_steps(horizon, cfg.dt)
    n_pts = n_full + 1 + (1 if last_h > 0 else 0)
    X, W, L, U = (np.empty(n_pts) for _ in range(4))
    _path_full(
        np.uint64(cfg.seed), np.uint64(path_index), float(cfg.params.x), float(cfg.params.b),
        float(cfg.dt), n_full, float(last_h), SCHEMES[cfg.scheme], X, W, L, U,
    )
    times = np.arange(n_full + 1) * cfg.dt
    if last_h > 0:
        times = np.append(times, horizon)
    return PathSample(times, X, W, L, U)


def _check_index(cfg: SimConfig, path_index: int) -> None:
    if not (0 <= path_index < cfg.n_paths):
        raise ConfigError(f"path_index {path_index} outside [0, {cfg.n_paths})")


def simulate_path(cfg: SimConfig, path_index: int) -> PathSample:
    """Simulate path ``path_index`` of the batch on ``[0, cfg.horizon]``."""
    _check_index(cfg, path_index)
    return _full_path(cfg, path_index, cfg.horizon)


def sample_exp_horizon(cfg: SimConfig, rate: float, path_index: int) -> PathSample:
    """Simulate path ``path_index`` up to an independent Exp(``rate``) time.

    The horizon comes from its own substream, so it is the same for every
    ``dt``; the final step is shortened to land on it exactly.
    """
    if not (rate > 0 and math.isfinite(rate)):
        raise ConfigError(f"rate must be positive, got {rate!r}")
    _check_index(cfg, path_index)
    tau = float(_exp_horizon_tau(np.uint64(cfg.seed), np.uint64(path_index), float(rate)))
    if tau / cfg.dt > MAX_STEPS:
        raise ConfigError(f"exponential horizon {tau:.3g} needs more than {MAX_STEPS:.0e} steps")
    return _full_path(cfg, path_index, tau)


@dataclass
class ExpHorizonBatch:
    """Terminal values of a batch of exponential-horizon paths."""

    X: np.ndarray
    L: np.ndarray
    U: np.ndarray
    tau: np.ndarray


def simulate_exp_horizon_batch(cfg: SimConfig, rate: float) -> ExpHorizonBatch:
    """Terminal ``(X, L, U, tau)`` of all ``cfg.n_paths`` exponential-horizon paths."""
    if not (rate > 0 and math.isfinite(rate)):
        raise ConfigError(f"rate must be positive, got {rate!r}")
    n = cfg.n_paths
    out = ExpHorizonBatch(np.empty(n), np.empty(n), np.empty(n), np.empty(n))
    _paths_exp_horizon(
        np.uint64(cfg.seed), np.uint64(0), float(cfg.params.x), float(cfg.params.b),
        float(cfg.dt), float(rate), SCHEMES[cfg.scheme], out.X, out.L, out.U, out.tau,
    )
    return out


@dataclass
class RecordBlock:
    """State of paths ``path_start .. path_start + n - 1`` at the recorded times.

    Arrays have shape ``(n, len(times))``; fields that were not requested are
    ``None``. ``I`` is the running time integral of ``X``.
    """

    path_start: int
    times: np.ndarray
    L: np.ndarray
    X: np.ndarray | None = None
    U: np.ndarray | None = None
    I: np.ndarray | None = None


def record_steps(times: Sequence[float], dt: float) -> np.ndarray:
    """Map record times onto grid step indices; they must sit on the ``dt`` grid."""
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ConfigError("need at least one record time")
    if np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ConfigError("record times must be nonnegative and nondecreasing")
    steps = np.rint(t / dt)
    if np.any(np.abs(steps * dt - t) > 1e-9 * np.maximum(1.0, t)):
        raise ConfigError(f"record times must be multiples of dt={dt}")
    if steps[-1] > MAX_STEPS:
        raise ConfigError(f"more than {MAX_STEPS:.0e} steps requested")
    return steps.astype(np.int64)


def iter_record_blocks(
    cfg: SimConfig,
    times: Sequence[float],
    fields: Sequence[str] = ("L",),
    block_size: int | None = None,
) -> Iterator[RecordBlock]:
    """Yield blocks of paths recorded at ``times``, in path order.

    ``fields`` picks which of ``X``, ``U`` and ``I`` are stored besides ``L``.
    Block boundaries only affect memory, never values.
    """
    if max(times) > cfg.horizon * (1 + 1e-12):
        raise ConfigError(f"record time {max(times)} beyond horizon {cfg.horizon}")
    steps = record_steps(times, cfg.dt)
    n_rec = steps.size
    if block_size is None:
        block_size = int(max(64, min(8192, _BLOCK_BUDGET // (n_rec * (1 + len(fields))))))
    t = steps * cfg.dt
    for start in range(0, cfg.n_paths, block_size):
        n = min(block_size, cfg.n_paths - start)
        arrs = {f: np.empty((n, n_rec) if f in fields else (n, 0)) for f in ("X", "U", "I")}
        rL = np.empty((n, n_rec))
        _paths_recorded(
            np.uint64(cfg.seed), np.uint64(start), float(cfg.params.x), float(cfg.params.b),
            float(cfg.dt), steps, SCHEMES[cfg.scheme], arrs["X"], rL, arrs["U"], arrs["I"],
        )
        yield RecordBlock(
            start, t, rL,
            **{f: (arrs[f] if f in fields else None) for f in ("X", "U", "I")},
        )


def per_path_values(
    cfg: SimConfig,
    times: Sequence[float],
    evaluate: Callable[[RecordBlock], np.ndarray],
    fields: Sequence[str] = ("L",),
) -> np.ndarray:
    """Apply ``evaluate`` block by block and concatenate the per-path results in path order."""
    parts = [np.asarray(evaluate(blk), dtype=float) for blk in iter_record_blocks(cfg, times, fields)]
    return np.concatenate(parts, axis=0)


def summarize(values: np.ndarray, cfg: SimConfig) -> McEstimate:
    """Sample mean and standard error, reduced in fixed path order."""
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(np.sum(values) / n)
    if n > 1:
        se = float(math.sqrt(np.sum((values - mean) ** 2) / (n - 1) / n))
    else:
        se = 0.0
    return McEstimate(mean, se, n, int(cfg.seed))


# ---------------------------------------------------------------------------
# functionals


@dataclass(frozen=True)
class Functional:
    """A scalar per-path functional evaluated at time ``t``."""

    name: str
    t: float
    alpha: float | None = None

    def evaluate(self, blk: RecordBlock) -> np.ndarray:
        try:
            fn = _FUNCTIONALS[self.name][0]
        except KeyError:
            raise UnknownFunctional(self.name) from None
        return fn(self, blk)


_FUNCTIONALS: dict[str, tuple[Callable, tuple]] = {
    "exp_tilt_L": (lambda f, blk: np.exp(f.alpha * blk.L[:, -1]), ()),
    "L_over_t": (lambda f, blk: blk.L[:, -1] / f.t, ()),
    "U_over_t": (lambda f, blk: blk.U[:, -1] / f.t, ("U",)),
    "occupation_mean": (lambda f, blk: blk.I[:, -1] / f.t, ("I",)),
}

FUNCTIONAL_NAMES = tuple(_FUNCTIONALS)


def exp_tilt_L(alpha: float, t: float) -> Functional:
    return Functional("exp_tilt_L", t, alpha)


def L_over_t(t: float) -> Functional:
    return Functional("L_over_t", t)


def U_over_t(t: float) -> Functional:
    return Functional("U_over_t", t)


def occupation_mean(t: float) -> Functional:
    return Functional("occupation_mean", t)


def make_functional(name: str, t: float, alpha: float | None = None) -> Functional:
    """Build a functional by name, as the CLI does."""
    if name not in _FUNCTIONALS:
        raise UnknownFunctional(name)
    if name == "exp_tilt_L" and alpha is None:
        raise ConfigError("exp_tilt_L needs alpha")
    return Functional(name, t, alpha if name == "exp_tilt_L" else None)


def mc_functional(cfg: SimConfig, functional: Functional) -> McEstimate:
    """Estimate ``E[functional]`` over ``cfg.n_paths`` paths."""
    if functional.name not in _FUNCTIONALS:
        raise UnknownFunctional(functional.name)
    if not (0 < functional.t <= cfg.horizon * (1 + 1e-12)):
        raise ConfigError(f"functional time t={functional.t} must lie in (0, horizon={cfg.horizon}]")
    fields = _FUNCTIONALS[functional.name][1]
    vals = per_path_values(cfg, [functional.t], functional.evaluate, fields)
    return summarize(vals, cfg)


def convergence_study(
    cfg: SimConfig, dts: Sequence[float], functional: Functional
) -> list[tuple[float, float, float]]:
    """Rerun ``functional`` at each step size with a common seed.

    Returns rows ``(dt, estimate, std_error)``. With the clamp scheme the
    estimates expose the ``O(sqrt(dt))`` local-time bias.
    """
    dts = [float(d) for d in dts]
    if not dts or any(d <= 0 for d in dts):
        raise ConfigError("dts must be positive")
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise ConfigError("dts must be strictly decreasing")
    rows = []
    for d in dts:
        est = mc_functional(cfg.replace(dt=d), functional)
        rows.append((d, est.mean, est.std_error))
    return rows
