"""Time propagation of the first, second and fourth moments.

Two fully independent routes are provided and cross-checked in the test
suite:

* `integrate` — direct adaptive Runge-Kutta 5(4) integration of the joint
  10-dimensional linear moment system assembled by `operator_algebra`.
* `propagate_semianalytic` — the variation-of-constants solution
  X(t) = e^(Mt) X(0) + int_0^t e^(M(t-s)) F(s) ds with the matrix
  exponential by Pade scaling-and-squaring and the forcing integral by
  adaptive Gauss-Legendre panels; the second moments inside F come from the
  closed forms, never from a joint integration.

The deviation of the fourth moments from their Wick completion obeys the
homogeneous part of the system alone, so Gaussian initial data must keep
the kurtosis pinned at 3; that identity is one of the strongest internal
checks on the assembled generator and forcing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .closed_form import kernel
from .model import (
    FourthMomentVector,
    ModelError,
    MomentState,
    OscillatorParams,
    QuadraticState,
)
from .operator_algebra import derive_moment_ode

__all__ = [
    "TrajectoryOptions",
    "MomentSeries",
    "InvalidGrid",
    "StepSizeUnderflow",
    "QuadratureNonConvergence",
    "DegenerateDistribution",
    "integrate",
    "propagate_semianalytic",
    "compute_series",
    "kurtosis",
    "expm",
    "joint_system",
    "second_moments_closed",
    "stationary_moments",
]


class InvalidGrid(ModelError):
    pass


class StepSizeUnderflow(RuntimeError):
    pass


class QuadratureNonConvergence(RuntimeError):
    pass


class DegenerateDistribution(ModelError):
    pass


@dataclass(frozen=True)
class TrajectoryOptions:
    """Tolerances and method selection for moment propagation."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    method: str = "rk"  # "rk" or "semianalytic"

    def __post_init__(self):
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ModelError("tolerances must be positive")
        if self.rel_tol < 1e-14:
            raise ModelError(f"rel_tol must be >= 1e-14, got {self.rel_tol!r}")
        if self.max_step <= 0.0:
            raise ModelError("max_step must be positive")
        if self.method not in ("rk", "semianalytic"):
            raise ModelError(f"method must be 'rk' or 'semianalytic', got {self.method!r}")


@dataclass(frozen=True)
class MomentSeries:
    """Moment trajectory on a strictly increasing time grid.

    `kurtosis` entries are NaN wherever the position variance is degenerate
    (below the kurtosis tolerance); for physical states they satisfy
    kappa >= 1.
    """

    times: np.ndarray
    states: tuple
    kurtosis: np.ndarray = field(repr=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "kurtosis", np.asarray(self.kurtosis, dtype=float))
        object.__setattr__(self, "states", tuple(self.states))
        if times.ndim != 1 or len(times) != len(self.states) or len(times) != len(self.kurtosis):
            raise InvalidGrid("times, states and kurtosis must have equal length")
        if len(times) > 1 and not np.all(np.diff(times) > 0.0):
            raise InvalidGrid("times must be strictly increasing")

    def var_x(self) -> np.ndarray:
        return np.array([s.quad.var_x for s in self.states])

    def kurtosis_at(self, t: float) -> float:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * max(1.0, abs(t)):
            raise InvalidGrid(f"time {t!r} not on the series grid")
        return float(self.kurtosis[idx])


def kurtosis(state: MomentState, abs_tol: float = 1e-12) -> float:
    """kappa = mu4 / mu2^2 from the central moments.

    In the zero-mean setting used throughout, <x^4> is the central fourth
    moment; for nonzero-mean states the stored fourth moments are read as
    moments about the mean.
    """
    mu2 = state.quad.var_x
    if mu2 <= abs_tol:
        raise DegenerateDistribution(
            f"position variance {mu2!r} <= {abs_tol!r}; kurtosis undefined"
        )
    return state.fourth.x4 / (mu2 * mu2)


# ---------------------------------------------------------------------------
# Joint linear system assembly
# ---------------------------------------------------------------------------

def joint_system(params: OscillatorParams):
    """10-dim linear system dY/dt = G Y + c over
    (mean_x, mean_p, <x2>, <xp+px>, <p2>, X1..X5) in raw moments."""
    sys1 = derive_moment_ode(1, params)
    sys2 = derive_moment_ode(2, params)
    sys4 = derive_moment_ode(4, params)
    G = np.zeros((10, 10))
    c = np.zeros(10)
    G[0:2, 0:2] = sys1.generator
    G[2:5, 2:5] = sys2.generator
    c[2:5] = sys2.forcing_const
    G[5:10, 5:10] = sys4.generator
    G[5:10, 2:5] = sys4.forcing_coupling
    c[5:10] = sys4.forcing_const
    return G, c


def _state_to_raw(state: MomentState) -> np.ndarray:
    q = state.quad
    return np.array([
        q.mean_x,
        q.mean_p,
        q.var_x + q.mean_x**2,
        q.sigma + 2.0 * q.mean_x * q.mean_p,
        q.var_p + q.mean_p**2,
        *state.fourth.as_array(),
    ])


def _raw_to_state(t: float, y: np.ndarray) -> MomentState:
    mx, mp = y[0], y[1]
    var_x = y[2] - mx * mx
    var_p = y[4] - mp * mp
    sigma = y[3] - 2.0 * mx * mp
    # integration round-off may leave tiny negatives on exact zeros
    scale = abs(y[2]) + mx * mx
    if -1e-12 * max(scale, 1e-290) <= var_x < 0.0:
        var_x = 0.0
    scale = abs(y[4]) + mp * mp
    if -1e-12 * max(scale, 1e-290) <= var_p < 0.0:
        var_p = 0.0
    x4, p4 = y[5], y[9]
    fscale = float(np.max(np.abs(y[5:]))) or 1e-290
    if -1e-12 * fscale <= x4 < 0.0:
        x4 = 0.0
    if -1e-12 * fscale <= p4 < 0.0:
        p4 = 0.0
    quad = QuadraticState.classical(
        var_x=var_x, var_p=var_p, sigma=sigma, mean_x=mx, mean_p=mp
    )
    fourth = FourthMomentVector(x4, y[6], y[7], y[8], p4)
    return MomentState(time=t, quad=quad, fourth=fourth)


def _series_from_raw(times, ys, kurt_tol=1e-12) -> MomentSeries:
    states = [_raw_to_state(float(t), y) for t, y in zip(times, ys)]
    kappa = np.full(len(states), np.nan)
    for i, s in enumerate(states):
        if s.quad.var_x > kurt_tol:
            kappa[i] = s.fourth.x4 / s.quad.var_x**2
    return MomentSeries(np.asarray(times, dtype=float), states, kappa)


# ---------------------------------------------------------------------------
# Adaptive Runge-Kutta 5(4), Dormand-Prince pair, PI step control
# ---------------------------------------------------------------------------

# stage times are not needed: the moment system is autonomous
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
# b5 - b4 (error estimate weights; last entry multiplies the FSAL stage)
_DP_E = (
    35 / 384 - 5179 / 57600,
    0.0,
    500 / 1113 - 7571 / 16695,
    125 / 192 - 393 / 640,
    -2187 / 6784 + 92097 / 339200,
    11 / 84 - 187 / 2100,
    -1 / 40,
)


def integrate(
    params: OscillatorParams,
    init: MomentState,
    times,
    opts: TrajectoryOptions | None = None,
) -> MomentSeries:
    """Direct adaptive integration of the joint moment system.

    `times` is the output grid; it must start at init.time and increase
    strictly.  Steps are clamped to grid points, so grid values are exact
    integration endpoints rather than interpolants.
    """
    opts = opts or TrajectoryOptions()
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise InvalidGrid("time grid must be a non-empty 1-d array")
    if abs(times[0] - init.time) > 1e-12 * max(1.0, abs(init.time)):
        raise InvalidGrid(f"grid must start at init.time={init.time!r}, got {times[0]!r}")
    if len(times) > 1 and not np.all(np.diff(times) > 0.0):
        raise InvalidGrid("time grid must be strictly increasing")

    G, c = joint_system(params)
    y = _state_to_raw(init)
    t = float(times[0])
    out = [y.copy()]

    def f(yv):
        return G @ yv + c

    k1 = f(y)
    # initial step from the standard norm heuristic
    scale = opts.abs_tol + opts.rel_tol * np.abs(y)
    d0 = math.sqrt(float(np.mean((y / scale) ** 2)))
    d1 = math.sqrt(float(np.mean((k1 / scale) ** 2)))
    span = float(times[-1] - times[0])
    if span == 0.0:
        return _series_from_raw(times, out)
    h = min(0.01 * d0 / d1 if d1 > 0 else span / 100.0, span / 10.0, opts.max_step)
    h = max(h, span * 1e-12)

    err_prev = 1.0
    ks = [None] * 6
    for target in times[1:]:
        target = float(target)
        while t < target:
            h = min(h, opts.max_step)
            clamped = h >= target - t
            h_step = target - t if clamped else h
            if h_step < 32.0 * np.finfo(float).eps * max(abs(t), 1.0):
                raise StepSizeUnderflow(
                    f"step size underflow at t={t!r}; system too stiff for the "
                    f"RK path, consider method='semianalytic'"
                )
            ks[0] = k1
            for i in range(1, 6):
                yi = y + h_step * sum(a * ks[j] for j, a in enumerate(_DP_A[i]))
                ks[i] = f(yi)
            y5 = y + h_step * sum(b * ks[i] for i, b in enumerate(_DP_B5) if b)
            k7 = f(y5)
            err_vec = h_step * (
                sum(e * ks[i] for i, e in enumerate(_DP_E[:6]) if e) + _DP_E[6] * k7
            )
            sc = opts.abs_tol + opts.rel_tol * np.maximum(np.abs(y), np.abs(y5))
            err = math.sqrt(float(np.mean((err_vec / sc) ** 2)))
            if err <= 1.0:
                t = target if clamped else t + h_step
                y = y5
                k1 = k7
                fac = 0.9 * (err + 1e-300) ** (-0.7 / 5.0) * err_prev ** (0.4 / 5.0)
                err_prev = max(err, 1e-10)
                h = h_step * min(5.0, max(0.2, fac))
            else:
                h = h_step * min(1.0, max(0.1, 0.9 * err ** (-1.0 / 5.0)))
        out.append(y.copy())
    return _series_from_raw(times, out, kurt_tol=opts.abs_tol)


# ---------------------------------------------------------------------------
# Matrix exponential: Pade(13) with scaling and squaring
# ---------------------------------------------------------------------------

_PADE13_B = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
_PADE13_THETA = 5.371920351148152


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential via the degree-13 diagonal Pade approximant with
    scaling chosen from the 1-norm."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    norm = float(np.linalg.norm(a, 1))
    s = max(0, int(math.ceil(math.log2(norm / _PADE13_THETA)))) if norm > _PADE13_THETA else 0
    a = a / (2.0**s)
    b = _PADE13_B
    ident = np.eye(n)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident
    )
    v = (
        a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
        + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
    )
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


# ---------------------------------------------------------------------------
# Closed-form second moments (forcing evaluator for the semianalytic path)
# ---------------------------------------------------------------------------

def second_moments_closed(params: OscillatorParams, raw0, t: float):
    """Raw second moments (<x2>, <xp+px>, <p2>) at time t for raw initial
    values `raw0`, from the kernel-based closed forms (any regime, omega = 0
    included)."""
    u0, s0, w0 = raw0
    m, g, w2 = params.m, params.gamma, params.omega**2

    if params.omega == 0.0:
        if g == 0.0:
            # closed system without restoring force: polynomial growth
            u = u0 + s0 * t / m + w0 * t * t / (m * m)
            s = s0 + 2.0 * w0 * t / m
            return u, s, w0
        e2 = math.exp(-2.0 * g * t)
        e4 = e2 * e2
        em2 = -math.expm1(-2.0 * g * t)
        em4 = -math.expm1(-4.0 * g * t)
        weq = params.m * params.kbt
        w = weq + (w0 - weq) * e4
        s = s0 * e2 + params.kbt * em2 / g + (w0 - weq) * e2 * em2 / (m * g)
        u = (
            u0
            + s0 * em2 / (2.0 * m * g)
            + params.kbt / (m * g) * (t - em2 / (2.0 * g))
            + (w0 - weq) / (m * m * g) * (em2 / (2.0 * g) - em4 / (4.0 * g))
        )
        return u, s, w

    k = kernel(params, t)
    D, P, Q = k.decay, k.sh2, k.s2
    kbt = params.kbt
    u = (
        kbt / (m * w2) * (1.0 - D - 2.0 * g * g * P - g * Q)
        + u0 * (D + (2.0 * g * g - w2) * P + g * Q)
        + w0 * P / (m * m)
        + s0 * (2.0 * g * P + Q) / (2.0 * m)
    )
    s = (
        4.0 * g * kbt * P
        - u0 * m * w2 * (Q + 2.0 * g * P)
        + w0 * (Q - 2.0 * g * P) / m
        + s0 * (D - 2.0 * w2 * P)
    )
    w = (
        m * kbt * (1.0 - D - 2.0 * g * g * P + g * Q)
        + u0 * m * m * w2 * w2 * P
        + w0 * (D + (2.0 * g * g - w2) * P - g * Q)
        + s0 * m * w2 * (g * P - 0.5 * Q)
    )
    return u, s, w


def _forcing(params: OscillatorParams, sys4, raw0, s: float) -> np.ndarray:
    u, sxp, w = second_moments_closed(params, raw0, s)
    return sys4.forcing_const + sys4.forcing_coupling @ np.array([u, sxp, w])


def _uniform_edges(a: float, b: float, width: float) -> np.ndarray:
    n = max(1, int(math.ceil((b - a) / width)))
    return np.linspace(a, b, n + 1)


def _panel_edges(params: OscillatorParams, dt: float) -> np.ndarray:
    """Initial quadrature panels for the forcing integral over [0, dt].

    Both the forcing and the propagator have fast transients on the
    1/gamma scale confined to layers at the ends of the window, while the
    interior varies on the oscillation scale pi/(2 omega) and, for
    overdamped systems, the slow rate 2 omega^2/(gamma + Omega).  Panel
    widths follow those scales so the count stays bounded for any gamma.
    """
    g, w = params.gamma, params.omega
    slow = [dt]
    if w > 0.0:
        slow.append(math.pi / (2.0 * w))
    slow_width = min(slow)
    if g <= 0.0:
        return _uniform_edges(0.0, dt, slow_width)
    fine_width = min(1.0 / (2.0 * g), slow_width)
    layer = 30.0 / g
    if dt <= 2.5 * layer:
        return _uniform_edges(0.0, dt, fine_width)
    return np.unique(np.concatenate([
        _uniform_edges(0.0, layer, fine_width),
        _uniform_edges(layer, dt - layer, slow_width),
        _uniform_edges(dt - layer, dt, fine_width),
    ]))


def propagate_semianalytic(
    params: OscillatorParams,
    init: MomentState,
    t: float,
    quad_rule_order: int = 20,
) -> MomentState:
    """Variation-of-constants propagation of the fourth moments.

    Gauss-Legendre panels are sized by the oscillation/damping scale
    min(pi/(2 omega), 1/(2 gamma)) and refined by doubling until the
    integral is converged; the second moments travel on their own closed
    forms.
    """
    if t < init.time:
        raise InvalidGrid(f"target time {t!r} before initial time {init.time!r}")
    if t == init.time:
        return init
    sys1 = derive_moment_ode(1, params)
    sys4 = derive_moment_ode(4, params)
    dt = float(t - init.time)
    y0 = _state_to_raw(init)
    raw0 = (y0[2], y0[3], y0[4])

    mean = expm(sys1.generator * dt) @ y0[0:2]
    u, sxp, w = second_moments_closed(params, raw0, dt)
    x0 = y0[5:]
    xt = expm(sys4.generator * dt) @ x0

    if dt > 0.0:
        edges = _panel_edges(params, dt)
        nodes, weights = np.polynomial.legendre.leggauss(quad_rule_order)

        def quad(edge_arr: np.ndarray) -> np.ndarray:
            total = np.zeros(5)
            for a, b in zip(edge_arr[:-1], edge_arr[1:]):
                half = 0.5 * (b - a)
                mid = 0.5 * (a + b)
                for xi, wi in zip(nodes, weights):
                    s = mid + half * xi
                    total += half * wi * (expm(sys4.generator * (dt - s)) @ _forcing(params, sys4, raw0, s))
            return total

        integral = quad(edges)
        budget = 16384
        # repeated squaring inside expm amplifies round-off by ~2^squarings;
        # refinements cannot resolve the integral below that noise floor
        squarings = max(1.0, np.linalg.norm(sys4.generator, 1) * dt / _PADE13_THETA)
        rel_floor = max(1e-11, 32.0 * float(np.finfo(float).eps) * squarings)
        while True:
            # halve every panel until the result stops moving
            edges = np.unique(np.concatenate([edges, 0.5 * (edges[:-1] + edges[1:])]))
            if len(edges) - 1 > budget:
                raise QuadratureNonConvergence(
                    f"forcing integral did not converge within {budget} panels"
                )
            refined = quad(edges)
            tol = rel_floor * (float(np.max(np.abs(xt + refined))) + 1e-13)
            done = float(np.max(np.abs(refined - integral))) <= tol
            integral = refined
            if done:
                break
        xt = xt + integral

    y = np.concatenate([mean, [u, sxp, w], xt])
    return _raw_to_state(t, y)


def compute_series(
    params: OscillatorParams,
    init: MomentState,
    times,
    opts: TrajectoryOptions | None = None,
) -> MomentSeries:
    """Moment series via the method selected in `opts` (default adaptive RK)."""
    opts = opts or TrajectoryOptions()
    if opts.method == "rk":
        return integrate(params, init, times, opts)
    times = np.asarray(times, dtype=float)
    ys = [
        _state_to_raw(propagate_semianalytic(params, init, float(t)))
        for t in times
    ]
    return _series_from_raw(times, ys, kurt_tol=opts.abs_tol)


def stationary_moments(params: OscillatorParams) -> MomentState:
    """Long-time limit of all ten moments (requires gamma > 0 and omega > 0)."""
    if params.gamma <= 0.0 or params.omega <= 0.0:
        raise ModelError("stationary moments require gamma > 0 and omega > 0")
    sys2 = derive_moment_ode(2, params)
    sys4 = derive_moment_ode(4, params)
    y2 = np.linalg.solve(sys2.generator, -sys2.forcing_const)
    f4 = sys4.forcing_const + sys4.forcing_coupling @ y2
    x = np.linalg.solve(sys4.generator, -f4)
    y = np.concatenate([[0.0, 0.0], y2, x])
    return _raw_to_state(math.inf, y)
