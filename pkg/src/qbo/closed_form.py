"""Regime-safe evaluation of the analytic position-variance formulas.

Four closed forms are provided: the exact variance of the damped thermal
oscillator for arbitrary initial second moments, its classical zero-init
reduction, the pure-decoherence (recoilless) limit, and the free-particle
(omega = 0) variance.

All hyperbolic/trigonometric building blocks are evaluated through a
HyperbolicKernel that branches on the damping regime.  Products of the form
e^(-2 gamma t) * cosh(...) are always assembled from combined exponentials
whose arguments never exceed zero, so overdamped sweeps up to gamma = 1e7
at t = 10 evaluate without overflow.  Inside the near-critical band the
ratio fields are series in d*t^2 (d = gamma^2 - omega^2), accurate there to
machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import (
    ModelError,
    OscillatorParams,
    QuadraticState,
    RegimeKind,
    classify_regime,
)

__all__ = [
    "NegativeTime",
    "ZeroFrequency",
    "ZeroDamping",
    "NonZeroFrequency",
    "HyperbolicKernel",
    "kernel",
    "exact_variance",
    "classical_variance",
    "decoherence_variance",
    "free_particle_variance",
]


class NegativeTime(ModelError):
    pass


class ZeroFrequency(ModelError):
    """Raised by the omega > 0 formulas; use free_particle_variance instead."""


class ZeroDamping(ModelError):
    pass


class NonZeroFrequency(ModelError):
    pass


@dataclass(frozen=True)
class HyperbolicKernel:
    """Damping-weighted hyperbolic building blocks at time t.

    With Omega^2 = gamma^2 - omega^2 (underdamped: Omega -> i nu keeps every
    field real):

        c2    = e^(-2 gamma t) cosh(2 Omega t)
        s2    = e^(-2 gamma t) sinh(2 Omega t) / Omega
        ch2   = e^(-2 gamma t) cosh(Omega t)^2
        sh2   = e^(-2 gamma t) sinh(Omega t)^2 / Omega^2
        decay = e^(-2 gamma t)
    """

    c2: float
    s2: float
    ch2: float
    sh2: float
    decay: float


def kernel(params: OscillatorParams, t: float) -> HyperbolicKernel:
    if t < 0.0:
        raise NegativeTime(f"time must be >= 0, got t={t!r}")
    if t == 0.0:
        return HyperbolicKernel(1.0, 0.0, 1.0, 0.0, 1.0)
    g = params.gamma
    d = g * g - params.omega**2
    regime = classify_regime(params).kind

    if regime is RegimeKind.OVERDAMPED:
        om = math.sqrt(d)
        if om * t <= 30.0:
            # direct hyperbolics are exact here and cannot overflow
            decay = math.exp(-2.0 * g * t)
            sh = math.sinh(om * t)
            return HyperbolicKernel(
                c2=decay * math.cosh(2.0 * om * t),
                s2=decay * math.sinh(2.0 * om * t) / om,
                ch2=decay * math.cosh(om * t) ** 2,
                sh2=decay * sh * sh / d,
                decay=decay,
            )
        # combined exponentials; Omega - gamma computed without cancellation
        diff = -(params.omega**2) / (om + g)  # = Omega - gamma <= 0
        sa = math.exp(diff * t)               # e^((Omega-gamma) t)
        sb = math.exp(-(om + g) * t)
        return HyperbolicKernel(
            c2=0.5 * (sa * sa + sb * sb),
            s2=(sa * sa - sb * sb) / (2.0 * om),
            ch2=0.25 * (sa + sb) ** 2,
            sh2=0.25 * (sa - sb) ** 2 / d,
            decay=sa * sb,
        )

    decay = math.exp(-2.0 * g * t)
    if regime is RegimeKind.UNDERDAMPED:
        nu = math.sqrt(-d)
        sn = math.sin(nu * t) / nu
        return HyperbolicKernel(
            c2=decay * math.cos(2.0 * nu * t),
            s2=decay * math.sin(2.0 * nu * t) / nu,
            ch2=decay * math.cos(nu * t) ** 2,
            sh2=decay * sn * sn,
            decay=decay,
        )

    # critical band: series in u = d t^2, |u| stays tiny wherever decay > 0
    if decay == 0.0:
        return HyperbolicKernel(0.0, 0.0, 0.0, 0.0, 0.0)
    u = d * t * t
    p_c2 = 1.0 + u * (2.0 + u * (2.0 / 3.0 + u * (4.0 / 45.0 + u * (2.0 / 315.0))))
    p_s2 = 2.0 * t * (1.0 + u * (2.0 / 3.0 + u * (2.0 / 15.0 + u * (4.0 / 315.0))))
    p_sh2 = t * t * (1.0 + u * (1.0 / 3.0 + u * (2.0 / 45.0 + u * (1.0 / 315.0))))
    return HyperbolicKernel(
        c2=decay * p_c2,
        s2=decay * p_s2,
        ch2=0.5 * decay * (1.0 + p_c2),
        sh2=decay * p_sh2,
        decay=decay,
    )


def _clamp_variance(value: float, scale: float) -> float:
    # round-off may push an exact zero slightly negative; anything beyond
    # the tolerance is returned as-is for the tests to catch
    if -1e-12 * scale <= value < 0.0:
        return 0.0
    return value


def _thermal_part(params: OscillatorParams, k: HyperbolicKernel) -> float:
    """Classical heating term of the exact variance, division-free in Omega.

    Algebraically equal to kbt/(m omega^2 Omega^2) * (Omega^2 +
    e^(-2 gamma t)(omega^2 - gamma^2 cosh(2 Omega t) - gamma Omega
    sinh(2 Omega t))), rewritten with cosh(2z) = 1 + 2 sinh(z)^2 so the
    1/Omega^2 cancels exactly in every regime.
    """
    g = params.gamma
    bracket = 1.0 - (k.decay + 2.0 * g * g * k.sh2 + g * k.s2)
    return params.kbt / (params.m * params.omega**2) * bracket


def exact_variance(params: OscillatorParams, init: QuadraticState, t: float) -> float:
    """Position variance of the damped thermal oscillator at time t.

    Initial-condition terms use the same division-free kernel rewrite as
    the thermal part; setting the initial moments to zero reduces this
    bit-exactly to classical_variance.
    """
    if t < 0.0:
        raise NegativeTime(f"time must be >= 0, got t={t!r}")
    if params.omega == 0.0:
        raise ZeroFrequency(
            "exact_variance divides by omega^2; use free_particle_variance for omega=0"
        )
    g = params.gamma
    w2 = params.omega**2
    k = kernel(params, t)
    thermal = _thermal_part(params, k)
    a_term = init.var_x * (k.decay + (2.0 * g * g - w2) * k.sh2 + g * k.s2)
    b_term = init.var_p * k.sh2 / params.m**2
    c_term = init.sigma * (2.0 * g * k.sh2 + k.s2) / (2.0 * params.m)
    total = thermal + a_term + b_term + c_term
    scale = abs(thermal) + abs(a_term) + abs(b_term) + abs(c_term)
    return _clamp_variance(total, scale)


def classical_variance(params: OscillatorParams, t: float) -> float:
    """Classical Brownian-oscillator variance (zero initial moments)."""
    if t < 0.0:
        raise NegativeTime(f"time must be >= 0, got t={t!r}")
    if params.omega == 0.0:
        raise ZeroFrequency(
            "classical_variance divides by omega^2; use free_particle_variance for omega=0"
        )
    value = _thermal_part(params, kernel(params, t))
    return _clamp_variance(value, abs(params.kbt / (params.m * params.omega**2)))


def decoherence_variance(params: OscillatorParams, init: QuadraticState, t: float) -> float:
    """Recoilless-limit variance: oscillatory initial terms plus secular
    linear heating, with the bounded sin(2 omega t) correction."""
    if t < 0.0:
        raise NegativeTime(f"time must be >= 0, got t={t!r}")
    if params.omega == 0.0:
        raise ZeroFrequency("decoherence_variance divides by omega^2 for omega=0")
    m, g, w = params.m, params.gamma, params.omega
    cw = math.cos(w * t)
    sw = math.sin(w * t)
    s2w = math.sin(2.0 * w * t)
    value = (
        init.var_x * cw * cw
        + init.var_p * sw * sw / (m * m * w * w)
        + init.sigma * s2w / (2.0 * m * w)
        + 2.0 * g * params.kbt / (m * w * w) * t
        - g * params.kbt / (m * w**3) * s2w
    )
    scale = abs(init.var_x) + abs(init.var_p) / (m * m * w * w) + abs(
        init.sigma
    ) / (2.0 * m * w) + (2.0 * t + 1.0 / w) * g * params.kbt / (m * w * w)
    return _clamp_variance(value, scale)


def free_particle_variance(params: OscillatorParams, init: QuadraticState, t: float) -> float:
    """Free-particle (omega = 0) variance of the damped thermal particle.

    The covariance term is shipped as sigma(0) (1 - e^(-2 gamma t)) /
    (2 m gamma): the printed form without the 1/(m gamma) factor is not
    dimensionally a length^2 and disagrees with the second-moment system,
    against which this expression is verified to 1e-8 and better.
    """
    if t < 0.0:
        raise NegativeTime(f"time must be >= 0, got t={t!r}")
    if params.omega != 0.0:
        raise NonZeroFrequency(
            f"free_particle_variance requires omega=0, got omega={params.omega!r}"
        )
    if params.gamma == 0.0:
        raise ZeroDamping("free_particle_variance requires gamma > 0")
    m, g = params.m, params.gamma
    em2 = -math.expm1(-2.0 * g * t)   # 1 - e^(-2 gamma t)
    em4 = -math.expm1(-4.0 * g * t)   # 1 - e^(-4 gamma t)
    value = (
        init.var_x
        + (em2 / (2.0 * g)) ** 2 * init.var_p / (m * m)
        + em2 * init.sigma / (2.0 * m * g)
        + params.kbt / (m * g * g) * (g * t - em2 + 0.25 * em4)
    )
    scale = (
        abs(init.var_x)
        + (em2 / (2.0 * g)) ** 2 * init.var_p / (m * m)
        + abs(init.sigma) * em2 / (2.0 * m * g)
        + params.kbt / (m * g * g) * (g * t + em2 + 0.25 * em4)
    )
    return _clamp_variance(value, scale)
