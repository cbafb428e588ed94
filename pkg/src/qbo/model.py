"""Parameter and moment-state containers shared by every other module.

All quantities live in dimensionless simulation units with hbar = 1 unless
stated otherwise.  Position x plays the role of a log-price, momentum p the
role of its trend;`m` is the inertia (capitalization), `gamma` the damping
rate, `omega` the restoring frequency and `kbt` the thermal energy of the
driving bath.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

__all__ = [
    "ModelError",
    "NonPositiveMass",
    "NegativeParameter",
    "NonFinite",
    "MissingParameter",
    "NonZeroMean",
    "CovarianceBoundViolation",
    "UncertaintyWarning",
    "OscillatorParams",
    "RegimeKind",
    "Regime",
    "QuadraticState",
    "FourthMomentVector",
    "MomentState",
    "validate_params",
    "classify_regime",
    "gaussian_fourth_moments",
    "CRITICAL_BAND_REL",
    "CRITICAL_BAND_ABS",
]

# Width of the near-critical band where gamma^2 - omega^2 loses more than
# half the significand; formulas switch to series evaluation inside it.
CRITICAL_BAND_REL = 1e-9
CRITICAL_BAND_ABS = 1e-300


class ModelError(ValueError):
    """Base class for parameter/state validation failures."""


class NonPositiveMass(ModelError):
    pass


class NegativeParameter(ModelError):
    pass


class NonFinite(ModelError):
    pass


class MissingParameter(ModelError):
    pass


class NonZeroMean(ModelError):
    pass


class CovarianceBoundViolation(ModelError):
    pass


class UncertaintyWarning(UserWarning):
    """State is below the Heisenberg bound; legitimate for classical data."""


@dataclass(frozen=True)
class OscillatorParams:
    """Physical parameters of the damped oscillator.

    omega = 0 is allowed and selects the free-particle specialization.
    """

    m: float
    gamma: float
    omega: float
    kbt: float
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("m", "gamma", "omega", "kbt", "hbar"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)):
                raise NonFinite(f"parameter '{name}' must be a real number, got {v!r}")
            if not math.isfinite(v):
                raise NonFinite(f"parameter '{name}' must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.m <= 0.0:
            raise NonPositiveMass(f"mass must be > 0, got m={self.m!r}")
        if self.hbar <= 0.0:
            raise NegativeParameter(f"hbar must be > 0, got hbar={self.hbar!r}")
        if self.gamma < 0.0:
            raise NegativeParameter(f"gamma must be >= 0, got gamma={self.gamma!r}")
        if self.omega < 0.0:
            raise NegativeParameter(f"omega must be >= 0, got omega={self.omega!r}")
        if self.kbt < 0.0:
            raise NegativeParameter(f"kbt must be >= 0, got kbt={self.kbt!r}")

    def as_dict(self) -> dict[str, float]:
        return {
            "m": self.m,
            "gamma": self.gamma,
            "omega": self.omega,
            "kbt": self.kbt,
            "hbar": self.hbar,
        }

    def replace(self, **kwargs) -> "OscillatorParams":
        d = self.as_dict()
        d.update(kwargs)
        return OscillatorParams(**d)


# Accepted spellings for the input map of validate_params.
_PARAM_ALIASES = {
    "m": "m",
    "mass": "m",
    "gamma": "gamma",
    "omega": "omega",
    "kbt": "kbt",
    "kb_t": "kbt",
    "hbar": "hbar",
}


def validate_params(raw) -> OscillatorParams:
    """Build OscillatorParams from a name -> value map.

    hbar defaults to 1; every other parameter must be present.  Values are
    never clamped: out-of-range input raises the matching ModelError naming
    the offending field.
    """
    values: dict[str, float] = {}
    for key, value in dict(raw).items():
        name = _PARAM_ALIASES.get(str(key).lower())
        if name is None:
            raise MissingParameter(f"unknown parameter name {key!r}")
        values[name] = value
    values.setdefault("hbar", 1.0)
    missing = [n for n in ("m", "gamma", "omega", "kbt") if n not in values]
    if missing:
        raise MissingParameter(f"missing parameter(s): {', '.join(missing)}")
    return OscillatorParams(**values)


class RegimeKind(enum.Enum):
    UNDERDAMPED = "underdamped"
    OVERDAMPED = "overdamped"
    CRITICAL = "critical"


@dataclass(frozen=True)
class Regime:
    """Damping regime with its discriminant d = gamma^2 - omega^2."""

    kind: RegimeKind
    discriminant: float


def critical_band(params: OscillatorParams) -> float:
    """Half-width of the near-critical band in the discriminant."""
    return CRITICAL_BAND_REL * max(
        params.gamma**2, params.omega**2, CRITICAL_BAND_ABS
    )


def classify_regime(params: OscillatorParams) -> Regime:
    d = params.gamma**2 - params.omega**2
    tau = critical_band(params)
    if d > tau:
        kind = RegimeKind.OVERDAMPED
    elif d < -tau:
        kind = RegimeKind.UNDERDAMPED
    else:
        kind = RegimeKind.CRITICAL
    return Regime(kind, d)


@dataclass(frozen=True)
class QuadraticState:
    """First and second moments at one instant.

    var_x and var_p are central variances; sigma is the symmetrized
    covariance <xp + px> - 2<x><p>.  The printed definition with a minus
    sign inside the bracket would be the constant i*hbar and cannot serve
    as a real initial value, so the symmetrized reading is used throughout.
    """

    mean_x: float = 0.0
    mean_p: float = 0.0
    var_x: float = 0.0
    var_p: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        for name in ("mean_x", "mean_p", "var_x", "var_p", "sigma"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise NonFinite(f"state field '{name}' must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.var_x < 0.0:
            raise NegativeParameter(f"var_x must be >= 0, got {self.var_x!r}")
        if self.var_p < 0.0:
            raise NegativeParameter(f"var_p must be >= 0, got {self.var_p!r}")
        bound = 2.0 * math.sqrt(self.var_x * self.var_p)
        # Cauchy-Schwarz; equality (incl. the all-zero degenerate state) is
        # legal, so allow a relative rounding slack.
        if abs(self.sigma) > bound * (1.0 + 1e-12) + 1e-300:
            raise CovarianceBoundViolation(
                f"|sigma|={abs(self.sigma)!r} exceeds 2*sqrt(var_x*var_p)={bound!r}"
            )

    @classmethod
    def quantum(cls, var_x, var_p, sigma=0.0, mean_x=0.0, mean_p=0.0, hbar=1.0):
        """Construct and warn if below the Heisenberg bound.

        The reference runs feed classically allowed zero moments into the
        quantum formulas, so a sub-uncertainty state is a warning, never an
        error.
        """
        state = cls(mean_x, mean_p, var_x, var_p, sigma)
        defect = state.var_x * state.var_p - 0.25 * state.sigma**2
        if defect < 0.25 * hbar**2 * (1.0 - 1e-12):
            warnings.warn(
                f"state below Heisenberg bound: var_x*var_p - sigma^2/4 = "
                f"{defect!r} < hbar^2/4 = {0.25 * hbar**2!r}",
                UncertaintyWarning,
                stacklevel=2,
            )
        return state

    @classmethod
    def classical(cls, var_x=0.0, var_p=0.0, sigma=0.0, mean_x=0.0, mean_p=0.0):
        """Construct without the Heisenberg check (degenerate states legal)."""
        return cls(mean_x, mean_p, var_x, var_p, sigma)


@dataclass(frozen=True)
class FourthMomentVector:
    """Symmetric-ordered fourth moments.

    Components: <x^4>, <x^3 p + p x^3>, <x^2 p^2 + p^2 x^2>,
    <x p^3 + p^3 x>, <p^4>.
    """

    x4: float
    x3p: float
    x2p2: float
    xp3: float
    p4: float

    def __post_init__(self):
        for name in ("x4", "x3p", "x2p2", "xp3", "p4"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise NonFinite(f"fourth moment '{name}' must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.x4 < 0.0:
            raise NegativeParameter(f"x4 must be >= 0, got {self.x4!r}")
        if self.p4 < 0.0:
            raise NegativeParameter(f"p4 must be >= 0, got {self.p4!r}")

    def as_array(self):
        return (self.x4, self.x3p, self.x2p2, self.xp3, self.p4)

    def is_physical(self, quad: QuadraticState) -> bool:
        """Jensen bounds x4 >= var_x^2, p4 >= var_p^2 (zero-mean states)."""
        return self.x4 >= quad.var_x**2 and self.p4 >= quad.var_p**2


@dataclass(frozen=True)
class MomentState:
    """Bundle of all integrated moments at one time point."""

    time: float
    quad: QuadraticState
    fourth: FourthMomentVector


def gaussian_fourth_moments(quad: QuadraticState, hbar: float = 1.0) -> FourthMomentVector:
    """Wick completion: fourth moments of the zero-mean Gaussian state with
    the given second moments.

    In symmetric ordering the mixed moment picks up an hbar correction:

        <x^2 p^2 + p^2 x^2> = 2 var_x var_p + sigma^2 - hbar^2,

    fixed by Weyl-ordering the monomial and checked against the truncated
    number-basis oracle (the oscillator ground state with var_x = var_p =
    1/2, sigma = 0, hbar = 1 gives exactly -1/2).
    """
    if quad.mean_x != 0.0 or quad.mean_p != 0.0:
        raise NonZeroMean(
            f"Gaussian completion requires zero means, got "
            f"mean_x={quad.mean_x!r}, mean_p={quad.mean_p!r}"
        )
    vx, vp, s = quad.var_x, quad.var_p, quad.sigma
    return FourthMomentVector(
        x4=3.0 * vx * vx,
        x3p=3.0 * vx * s,
        x2p2=2.0 * vx * vp + s * s - hbar * hbar,
        xp3=3.0 * vp * s,
        p4=3.0 * vp * vp,
    )
