"""Hermetic cross-method validation suite.

Each check pits two independently built routes against each other: the
symbolic derivation against the printed generator/forcing, the closed-form
variances against direct ODE integration, the Wick-closure identity, the
semianalytic propagator against the Runge-Kutta path, the exact operator
algebra against truncated number-basis matrices, and the Langevin sampler
against the classical variance.  No network, no external data.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .closed_form import classical_variance, exact_variance
from .model import (
    MomentState,
    OscillatorParams,
    QuadraticState,
    gaussian_fourth_moments,
)
from .moment_dynamics import integrate, propagate_semianalytic, stationary_moments
from .operator_algebra import (
    ParamPoly,
    PolyOperator,
    anticommutator,
    commutator,
    derive_moment_ode,
)
from .stochastic import EnsembleSpec, simulate

__all__ = ["CheckResult", "run_checks", "CHECK_NAMES"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _pp(coeff, **powers) -> ParamPoly:
    return ParamPoly.term(Fraction(coeff), **powers)


def check_symbolic_generator() -> tuple[bool, str]:
    """Order-4 generator and forcing reproduce the printed system entrywise."""
    params = OscillatorParams(m=1.0, gamma=1.0, omega=1.0, kbt=1.0)
    sys4 = derive_moment_ode(4, params)
    z = ParamPoly.zero()
    expected_gen = [
        [z, _pp(2, m=-1), z, z, z],
        [_pp(-2, m=1, omega=2), _pp(-2, gamma=1), _pp(3, m=-1), z, z],
        [z, _pp(-2, m=1, omega=2), _pp(-4, gamma=1), _pp(2, m=-1), z],
        [z, z, _pp(-3, m=1, omega=2), _pp(-6, gamma=1), _pp(2, m=-1)],
        [z, z, z, _pp(-2, m=1, omega=2), _pp(-8, gamma=1)],
    ]
    expected_const = [
        z, _pp(3, m=-1, hbar=2), _pp(-4, gamma=1, hbar=2),
        _pp(-3, m=1, omega=2, hbar=2), z,
    ]
    expected_coupling = [
        [z, z, z],
        [z, z, z],
        [_pp(8, m=1, gamma=1, kbt=1), z, z],
        [z, _pp(12, m=1, gamma=1, kbt=1), z],
        [z, z, _pp(24, m=1, gamma=1, kbt=1)],
    ]
    for i in range(5):
        for j in range(5):
            if sys4.generator_sym[i][j] != expected_gen[i][j]:
                return False, f"generator[{i}][{j}] = {sys4.generator_sym[i][j].text()}"
        if sys4.forcing_const_sym[i] != expected_const[i]:
            return False, f"forcing const[{i}] = {sys4.forcing_const_sym[i].text()}"
        for j in range(3):
            if sys4.forcing_coupling_sym[i][j] != expected_coupling[i][j]:
                return False, f"forcing coupling[{i}][{j}]"
    return True, "generator and forcing match symbolically, entry by entry"


def check_algebra_oracle(dim: int = 60, guard: int = 20) -> tuple[bool, str]:
    """Commutators/anticommutators agree with truncated ladder matrices."""
    keep = dim - guard
    worst = 0.0
    basis = [(a, b) for a in range(5) for b in range(5) if 0 < a + b <= 4]
    for hbar in (1.0, 0.5):
        for a1, b1 in basis:
            m1 = PolyOperator.monomial(a1, b1)
            n1 = m1.to_matrix(dim, hbar)
            for a2, b2 in basis:
                m2 = PolyOperator.monomial(a2, b2)
                n2 = m2.to_matrix(dim, hbar)
                prod = n1 @ n2
                # cancellation (e.g. [p^3, p^4] = 0) happens at the scale of
                # the products, which is where the round-off lives
                scale = max(1.0, float(np.max(np.abs(prod))))
                for op, mat in (
                    (commutator(m1, m2), prod - n2 @ n1),
                    (anticommutator(m1, m2), prod + n2 @ n1),
                ):
                    got = op.to_matrix(dim, hbar)[:keep, :keep]
                    ref = mat[:keep, :keep]
                    worst = max(worst, float(np.max(np.abs(got - ref))) / scale)
    return worst < 1e-12, f"max relative deviation {worst:.2e} (tol 1e-12)"


def check_gaussian_x2p2(dim: int = 80) -> tuple[bool, str]:
    """Wick completion of <x^2 p^2 + p^2 x^2> against the ground state."""
    op = PolyOperator.x(2) * PolyOperator.p(2) + PolyOperator.p(2) * PolyOperator.x(2)
    vals = []
    for d in (40, 60, dim):
        mat = op.to_matrix(d, hbar=1.0)
        vals.append(float(mat[0, 0].real))
    converged = abs(vals[-1] - vals[-2]) < 1e-12
    quad = QuadraticState(var_x=0.5, var_p=0.5)
    wick = gaussian_fourth_moments(quad, hbar=1.0).x2p2
    ok = converged and abs(vals[-1] - wick) < 1e-12 and abs(wick + 0.5) < 1e-15
    return ok, f"oracle {vals[-1]!r} vs completion {wick!r}"


def check_closed_form_vs_ode(full_grid: bool = False) -> tuple[bool, str]:
    """Exact variance equals the integrated <x^2> over the parameter grid."""
    init = QuadraticState(var_x=0.7, var_p=1.3, sigma=0.4)
    fourth = gaussian_fourth_moments(init)
    vals = ([0.01, 0.1, 1.0, 10.0] if full_grid else [0.01, 1.0, 10.0])
    masses = [0.1, 1.0, 10.0] if full_grid else [0.1, 10.0]
    worst = 0.0
    for m in masses:
        for g in vals:
            for w in vals:
                for kbt in vals:
                    params = OscillatorParams(m=m, gamma=g, omega=w, kbt=kbt)
                    st = MomentState(0.0, init, fourth)
                    ser = integrate(params, st, [0.0, 0.1, 1.0, 10.0])
                    for i, t in enumerate((0.1, 1.0, 10.0), start=1):
                        a = exact_variance(params, init, t)
                        b = ser.states[i].quad.var_x
                        worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
    return worst < 1e-8, f"max relative deviation {worst:.2e} (tol 1e-8)"


def check_classical_reduction() -> tuple[bool, str]:
    """Exact variance with zero initial moments equals the classical form."""
    zero = QuadraticState.classical()
    worst = 0.0
    for m in (0.1, 1.0, 10.0):
        for g in (0.01, 0.1, 1.0, 10.0):
            for w in (0.01, 0.1, 1.0, 10.0):
                for kbt in (0.01, 0.1, 1.0, 10.0):
                    params = OscillatorParams(m=m, gamma=g, omega=w, kbt=kbt)
                    for t in (0.1, 1.0, 10.0):
                        a = exact_variance(params, zero, t)
                        b = classical_variance(params, t)
                        worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
    return worst < 1e-12, f"max relative deviation {worst:.2e} (tol 1e-12)"


def check_wick_closure() -> tuple[bool, str]:
    """Gaussian initial data keeps kappa identically 3."""
    from .experiments import FIG3_PARAMS

    quad = QuadraticState(var_x=0.5, var_p=0.5)
    st = MomentState(0.0, quad, gaussian_fourth_moments(quad))
    ser = integrate(FIG3_PARAMS, st, np.linspace(0.0, 200.0, 201))
    dev = float(np.max(np.abs(ser.kurtosis - 3.0)))
    return dev < 1e-6, f"max |kappa - 3| = {dev:.2e} (tol 1e-6)"


def check_semianalytic() -> tuple[bool, str]:
    """Both propagation routes agree on the reference kurtosis config."""
    from .experiments import FIG3_INIT_FOURTH, FIG3_PARAMS

    quad = QuadraticState(var_x=0.5, var_p=0.5)
    st = MomentState(0.0, quad, FIG3_INIT_FOURTH)
    worst = 0.0
    for params in (FIG3_PARAMS, FIG3_PARAMS.replace(omega=0.0)):
        ser = integrate(params, st, [0.0, 100.0])
        direct = np.array(ser.states[1].fourth.as_array())
        semi = np.array(propagate_semianalytic(params, st, 100.0).fourth.as_array())
        worst = max(worst, float(np.max(np.abs(direct - semi) / np.maximum(np.abs(direct), 1e-300))))
    return worst < 1e-7, f"max relative deviation {worst:.2e} (tol 1e-7)"


def check_stationarity() -> tuple[bool, str]:
    """Late-time moments approach the null-space solution of the system."""
    params = OscillatorParams(m=2.0, gamma=0.8, omega=1.3, kbt=0.9)
    target = stationary_moments(params)
    quad = QuadraticState(var_x=0.7, var_p=1.3, sigma=0.4)
    st = MomentState(0.0, quad, gaussian_fourth_moments(quad))
    ser = integrate(params, st, [0.0, 40.0])
    got = ser.states[1]
    checks = [
        (got.quad.var_p, target.quad.var_p),
        (got.quad.var_x, target.quad.var_x),
        (got.fourth.x4, target.fourth.x4),
        (got.fourth.p4, target.fourth.p4),
    ]
    worst = max(abs(a - b) / max(abs(b), 1e-300) for a, b in checks)
    eq_p = abs(target.quad.var_p - params.m * params.kbt) / (params.m * params.kbt)
    eq_x = abs(target.quad.var_x - params.kbt / (params.m * params.omega**2)) * (
        params.m * params.omega**2 / params.kbt
    )
    ok = worst < 1e-8 and eq_p < 1e-12 and eq_x < 1e-12
    return ok, (
        f"relaxation deviation {worst:.2e}; equipartition defects "
        f"({eq_x:.1e}, {eq_p:.1e})"
    )


def check_montecarlo(n_traj: int = 20_000) -> tuple[bool, str]:
    """Langevin ensemble variance within 4 standard errors of the formula."""
    params = OscillatorParams(m=1.0, gamma=0.5, omega=1.0, kbt=1.0)
    spec = EnsembleSpec(n_traj=n_traj, dt=1e-3, t_end=3.0, seed=20260808,
                        init=QuadraticState.classical())
    res = simulate(params, spec, [1.0, 3.0])
    worst = 0.0
    for i, t in enumerate(res.times):
        dev = abs(res.var_x[i] - classical_variance(params, t)) / res.se_var_x[i]
        worst = max(worst, dev)
    again = simulate(params, spec, [1.0, 3.0], block_size=777)
    identical = bool(
        np.array_equal(res.var_x, again.var_x) and np.array_equal(res.x4, again.x4)
    )
    ok = worst <= 4.0 and identical
    return ok, f"max deviation {worst:.2f} SE (tol 4); rerun bit-identical: {identical}"


CHECK_NAMES = {
    "symbolic-generator": check_symbolic_generator,
    "algebra-oracle": check_algebra_oracle,
    "gaussian-x2p2": check_gaussian_x2p2,
    "closed-form-vs-ode": check_closed_form_vs_ode,
    "classical-reduction": check_classical_reduction,
    "wick-closure": check_wick_closure,
    "semianalytic-agreement": check_semianalytic,
    "stationarity": check_stationarity,
    "montecarlo": check_montecarlo,
}


def run_checks(names=None) -> list[CheckResult]:
    results = []
    for name, fn in CHECK_NAMES.items():
        if names and name not in names:
            continue
        t0 = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crash of the suite
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(name, passed, detail, time.perf_counter() - t0))
    return results
