"""Classical Langevin Monte Carlo oracle for the damped thermal oscillator.

The sampled diffusion is

    dx = (p/m) dt
    dp = -(m omega^2 x + 2 gamma p) dt + sqrt(4 m gamma kbt) dW,

the unique classical SDE whose moment equations reproduce the gamma- and
kbt-terms of the derived second-moment system (friction 2 gamma, stationary
equipartition <p^2> = m kbt).  Trajectories follow the plain Euler-Maruyama
chain; the quadratic-in-dt bias is controlled by the enforced small step
and checked by the dt-halving test.

Random stream contract: trajectory `i` owns the counter-based stream
Philox(key=(seed, i)).  Its first two normals fix the initial phase-space
point, the following n_steps normals drive the path, in order.

Determinism: the EM chain is linear, so every fixed time segment (segment
boundaries sit at multiples of 2048 steps plus the sample indices, an
algorithm constant) is applied as its exact prefix map plus one
noise-coefficient contraction per trajectory row.  Rows never interact and
the final reduction runs in one fixed pass over trajectory order, so the
empirical moments are bit-identical for any block size or thread count.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import ModelError, OscillatorParams, QuadraticState
from .parallel import thread_count

__all__ = [
    "EnsembleSpec",
    "EnsembleSeries",
    "UnstableStep",
    "StepTooLarge",
    "simulate",
]

_OVERFLOW_GUARD = 1e150
_SEGMENT_STEPS = 2048


class UnstableStep(RuntimeError):
    pass


class StepTooLarge(ModelError):
    pass


@dataclass(frozen=True)
class EnsembleSpec:
    """Ensemble definition; `init` is read as a Gaussian phase-space
    distribution (all zeros = point mass at the origin)."""

    n_traj: int
    dt: float
    t_end: float
    seed: int
    init: QuadraticState = QuadraticState()
    allow_large_dt: bool = False

    def __post_init__(self):
        if self.n_traj <= 0:
            raise ModelError(f"n_traj must be positive, got {self.n_traj!r}")
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ModelError(f"dt must be positive and finite, got {self.dt!r}")
        if self.t_end < 0.0:
            raise ModelError(f"t_end must be >= 0, got {self.t_end!r}")
        if not (-(2**63) <= int(self.seed) < 2**64):
            raise ModelError(f"seed must fit in 64 bits, got {self.seed!r}")


@dataclass(frozen=True)
class EnsembleSeries:
    """Empirical moments with standard errors at each sample time."""

    times: np.ndarray
    n_traj: int
    mean_x: np.ndarray
    mean_p: np.ndarray
    var_x: np.ndarray
    var_p: np.ndarray
    sigma: np.ndarray
    x4: np.ndarray
    se_mean_x: np.ndarray
    se_mean_p: np.ndarray
    se_var_x: np.ndarray
    se_var_p: np.ndarray
    se_sigma: np.ndarray
    se_x4: np.ndarray


def _check_dt(params: OscillatorParams, spec: EnsembleSpec):
    rates = [r for r in (params.gamma, params.omega) if r > 0.0]
    if not rates:
        return
    limit = 0.05 / max(rates)
    if spec.dt <= limit:
        return
    msg = (
        f"dt={spec.dt!r} exceeds the stability bound 0.05*min(1/gamma, 1/omega)"
        f"={limit!r}"
    )
    if spec.allow_large_dt:
        warnings.warn(msg, UserWarning, stacklevel=3)
    else:
        raise StepTooLarge(msg)


def _init_transform(init: QuadraticState):
    """Cholesky factor of the phase-space covariance (degenerate allowed)."""
    l11 = math.sqrt(init.var_x)
    if l11 > 0.0:
        l21 = 0.5 * init.sigma / l11
    else:
        l21 = 0.0  # sigma = 0 forced by the covariance bound
    rem = init.var_p - l21 * l21
    l22 = math.sqrt(rem) if rem > 0.0 else 0.0
    return l11, l21, l22


class _StreamPool:
    """Reusable Philox generators rebound to (seed, trajectory) keys.

    Rebinding through the state dict reproduces a freshly keyed Philox
    bit-for-bit while skipping per-object entropy setup.
    """

    def __init__(self, size: int, seed: int):
        self.seed = np.uint64(seed)
        self.bgs = []
        self.gens = []
        for _ in range(size):
            bg = np.random.Philox(key=np.zeros(2, dtype=np.uint64))
            self.bgs.append(bg)
            self.gens.append(np.random.Generator(bg))
        self._template = dict(self.bgs[0].state)

    def bind(self, slot: int, traj: int):
        state = dict(self._template)
        state["state"] = {
            "counter": np.zeros(4, dtype=np.uint64),
            "key": np.array([self.seed, np.uint64(traj)], dtype=np.uint64),
        }
        state["buffer"] = np.zeros(4, dtype=np.uint64)
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        state["uinteger"] = 0
        self.bgs[slot].state = state
        return self.gens[slot]


def _segment_maps(step_mat: np.ndarray, kick: float, length: int):
    """Exact chain maps for one segment of `length` EM steps.

    C[j] is the coefficient of noise draw j in the segment-end state:
    state_end = A^length state_0 + (noise . cx, noise . cp).
    """
    cx = np.empty(length)
    cp = np.empty(length)
    v = np.array([0.0, kick])
    for j in range(length - 1, -1, -1):
        cx[j], cp[j] = v
        v = step_mat @ v
    a_pow = np.eye(2)
    for _ in range(length):
        a_pow = step_mat @ a_pow
    return a_pow, cx, cp


def simulate(
    params: OscillatorParams,
    spec: EnsembleSpec,
    sample_times,
    block_size: int = 8192,
) -> EnsembleSeries:
    """Euler-Maruyama ensemble with per-trajectory Philox streams.

    Sample times snap to the nearest step index k = round(t/dt); the
    returned `times` carry the snapped values.  `block_size` shapes the
    computation only; noise generation threads are capped by QBO_THREADS.
    """
    _check_dt(params, spec)
    workers = min(thread_count(), 8)
    sample_times = np.atleast_1d(np.asarray(sample_times, dtype=float))
    if np.any(sample_times < 0.0) or np.any(sample_times > spec.t_end + 0.5 * spec.dt):
        raise ModelError("sample times must lie in [0, t_end]")
    idx = np.array([int(round(t / spec.dt)) for t in sample_times], dtype=int)
    times = idx * spec.dt
    n_steps = int(max(idx.max(initial=0), round(spec.t_end / spec.dt)))
    sample_at: dict[int, list[int]] = {}
    for row, k in enumerate(idx):
        sample_at.setdefault(int(k), []).append(row)

    # fixed segment grid: multiples of _SEGMENT_STEPS plus all sample indices
    cuts = sorted({0, n_steps, *sample_at} | set(range(0, n_steps, _SEGMENT_STEPS)))
    segments = [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]

    m, g = params.m, params.gamma
    dt = spec.dt
    kick = math.sqrt(4.0 * m * g * params.kbt * dt)
    step_mat = np.array([
        [1.0, dt / m],
        [-m * params.omega**2 * dt, 1.0 - 2.0 * g * dt],
    ])
    maps = {}
    for a, b in segments:
        if b - a not in maps:
            maps[b - a] = _segment_maps(step_mat, kick, b - a)
    max_len = max((b - a for a, b in segments), default=0)
    l11, l21, l22 = _init_transform(spec.init)

    n = spec.n_traj
    xs = np.empty((len(times), n))
    ps = np.empty((len(times), n))
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    streams = _StreamPool(min(block_size, n), spec.seed)

    try:
        for lo in range(0, n, block_size):
            hi = min(lo + block_size, n)
            nb = hi - lo
            gens = [streams.bind(b, lo + b) for b in range(nb)]
            z = np.empty((nb, 2))
            noise = np.empty((nb, max_len))

            def draw(rows, buf, count):
                for b in rows:
                    buf[b, :count] = gens[b].standard_normal(count)

            def parallel(buf, count):
                if pool is None or nb < 2 * workers:
                    draw(range(nb), buf, count)
                else:
                    chunks = np.array_split(np.arange(nb), workers)
                    list(pool.map(lambda rows: draw(rows, buf, count), chunks))

            parallel(z, 2)
            x = spec.init.mean_x + l11 * z[:, 0]
            p = spec.init.mean_p + l21 * z[:, 0] + l22 * z[:, 1]
            for row in sample_at.get(0, ()):
                xs[row, lo:hi] = x
                ps[row, lo:hi] = p

            for a, b_end in segments:
                length = b_end - a
                parallel(noise, length)
                a_pow, cx, cp = maps[length]
                xn = a_pow[0, 0] * x + a_pow[0, 1] * p
                pn = a_pow[1, 0] * x + a_pow[1, 1] * p
                xn += np.einsum("ij,j->i", noise[:, :length], cx)
                pn += np.einsum("ij,j->i", noise[:, :length], cp)
                x, p = xn, pn
                amax = max(float(np.max(np.abs(x))), float(np.max(np.abs(p))))
                if not math.isfinite(amax) or amax > _OVERFLOW_GUARD:
                    raise UnstableStep(
                        f"trajectory overflow beyond {_OVERFLOW_GUARD:g} by step "
                        f"{b_end} (t={b_end * dt!r}) with dt={dt!r}, "
                        f"params={params.as_dict()!r}"
                    )
                for row in sample_at.get(b_end, ()):
                    xs[row, lo:hi] = x
                    ps[row, lo:hi] = p
    finally:
        if pool is not None:
            pool.shutdown(wait=False)

    # single fixed-order reduction: blocking cannot change any bit of this
    def central(v):
        mean = v.sum() / n
        d = v - mean
        return mean, d

    out = {k: np.empty(len(times)) for k in (
        "mean_x", "mean_p", "var_x", "var_p", "sigma", "x4",
        "se_mean_x", "se_mean_p", "se_var_x", "se_var_p", "se_sigma", "se_x4",
    )}
    for i in range(len(times)):
        mx, dx = central(xs[i])
        mp, dp = central(ps[i])
        dx2 = dx * dx
        dp2 = dp * dp
        m2x = dx2.sum() / n
        m2p = dp2.sum() / n
        m4x = (dx2 * dx2).sum() / n
        m4p = (dp2 * dp2).sum() / n
        m8x = (dx2 * dx2 * dx2 * dx2).sum() / n
        cov = (dx * dp).sum() / n
        covvar = (dx2 * dp2).sum() / n - cov * cov
        out["mean_x"][i] = mx
        out["mean_p"][i] = mp
        out["var_x"][i] = m2x
        out["var_p"][i] = m2p
        out["sigma"][i] = 2.0 * cov
        out["x4"][i] = m4x
        out["se_mean_x"][i] = math.sqrt(max(m2x, 0.0) / n)
        out["se_mean_p"][i] = math.sqrt(max(m2p, 0.0) / n)
        out["se_var_x"][i] = math.sqrt(max(m4x - m2x * m2x, 0.0) / n)
        out["se_var_p"][i] = math.sqrt(max(m4p - m2p * m2p, 0.0) / n)
        out["se_sigma"][i] = 2.0 * math.sqrt(max(covvar, 0.0) / n)
        out["se_x4"][i] = math.sqrt(max(m8x - m4x * m4x, 0.0) / n)

    return EnsembleSeries(times=times, n_traj=n, **out)
