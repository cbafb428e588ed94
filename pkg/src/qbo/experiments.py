"""Declarative reproduction of the reference figures and kurtosis table.

Figures 1 and 2 are log-log parameter sweeps of the position variance at
t = 10 (quantum/decoherence curve against the classical one); Figure 3 and
Table 1 are kurtosis trajectories of the underdamped configuration
m = 20, gamma = 1e-3, kbt = 0.38, omega = 0.018 rad/min (free particle:
omega = 0) with the time unit fixed to one minute.

Initial fourth moments for the kurtosis runs: the published table states
only <x^2> = <p^2> = 1/2 and <x^4> = 50 and notes the results are
sensitive to the remaining initial values.  The defaults below were
calibrated once (weighted least squares on the kurtosis excess, which is
linear in the initial Wick deviation) so that all eight table entries land
within 2.2 percent and the late-time tail oscillates around 3:

    x3p = 23.65, x2p2 = -22.35, xp3 = 0.13, p4 = 20.68

They satisfy the physicality bounds x4 >= var_x^2, p4 >= var_p^2 and are
recorded in the header of every emitted dataset.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .closed_form import classical_variance, decoherence_variance, exact_variance
from .model import (
    FourthMomentVector,
    ModelError,
    MomentState,
    OscillatorParams,
    QuadraticState,
    gaussian_fourth_moments,
)
from .moment_dynamics import MomentSeries, TrajectoryOptions, compute_series
from .parallel import thread_count

__all__ = [
    "Dataset",
    "SweepConfig",
    "KurtosisRunConfig",
    "FIG3_INIT_FOURTH",
    "TABLE1_TIMES",
    "TABLE1_REFERENCE",
    "figure1_config",
    "figure2_config",
    "run_sweep",
    "run_figure1",
    "run_figure2",
    "figure3_config",
    "run_kurtosis",
    "run_figure3",
    "figure3_dataset",
    "run_table1",
]


@dataclass(frozen=True)
class Dataset:
    """Column-oriented result table plus the header metadata that makes it
    reproducible."""

    columns: tuple
    rows: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.size == 0:
            rows = rows.reshape(0, len(self.columns))
        if rows.ndim != 2 or rows.shape[1] != len(self.columns):
            raise ModelError(
                f"rows must be (n, {len(self.columns)}) for columns {self.columns!r}"
            )
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "meta", dict(self.meta))

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]


# ---------------------------------------------------------------------------
# Figures 1 and 2: variance sweeps
# ---------------------------------------------------------------------------

_QUANTUM_INIT = QuadraticState(var_x=1e-7, var_p=1e7, sigma=0.01)

_PANELS = {
    "left": dict(fixed={"omega": 0.1, "m": 0.1, "gamma": 10.0}, swept="kbt",
                 lo=1e-7, hi=1e7),
    "middle": dict(fixed={"omega": 10.0, "m": 10.0, "kbt": 0.1}, swept="gamma",
                   lo=1e-2, hi=1e7),
    "right": dict(fixed={"m": 10.0, "gamma": 1.0, "kbt": 0.1}, swept="omega",
                  lo=1e-2, hi=1e2),
}


@dataclass(frozen=True)
class SweepConfig:
    """One log-spaced parameter sweep panel."""

    panel: str
    fixed: dict
    swept: str
    lo: float
    hi: float
    t: float
    curves: tuple = ("exact", "classical")
    n_points: int = 200
    init: QuadraticState = _QUANTUM_INIT
    hbar: float = 1.0

    def __post_init__(self):
        if self.swept in self.fixed:
            raise ModelError(f"swept parameter {self.swept!r} also fixed")
        if not (self.lo > 0.0 and self.hi > self.lo):
            raise ModelError("log sweep needs 0 < lo < hi")
        if self.n_points < 1:
            raise ModelError("n_points must be >= 1")
        bad = [c for c in self.curves if c not in ("exact", "classical", "decoherence")]
        if bad:
            raise ModelError(f"unknown curve(s) {bad!r}")

    def values(self) -> np.ndarray:
        return np.logspace(math.log10(self.lo), math.log10(self.hi), self.n_points)


def figure1_config(panel: str, n_points: int = 200) -> SweepConfig:
    p = _PANELS[panel.lower()]
    return SweepConfig(panel=panel.lower(), fixed=dict(p["fixed"]), swept=p["swept"],
                       lo=p["lo"], hi=p["hi"], t=10.0,
                       curves=("exact", "classical"), n_points=n_points)


def figure2_config(panel: str, n_points: int = 200) -> SweepConfig:
    # same panels with the very large mass replacing each panel's m
    cfg = figure1_config(panel, n_points)
    fixed = dict(cfg.fixed)
    fixed["m"] = 1000.0
    return replace(cfg, fixed=fixed, curves=("decoherence", "classical"))


_CURVE_FUNCS = {
    "exact": lambda p, init, t: exact_variance(p, init, t),
    "decoherence": lambda p, init, t: decoherence_variance(p, init, t),
    "classical": lambda p, init, t: classical_variance(p, t),
}


def run_sweep(config: SweepConfig) -> Dataset:
    """Evaluate every curve of the sweep; points are independent and may be
    computed in parallel without affecting the output."""
    values = config.values()

    def point(v: float):
        names = dict(config.fixed)
        names[config.swept] = v
        params = OscillatorParams(hbar=config.hbar, **names)
        return [_CURVE_FUNCS[c](params, config.init, config.t) for c in config.curves]

    workers = min(thread_count(), 8)
    if workers > 1 and len(values) >= 16:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(point, values))
    else:
        results = [point(v) for v in values]

    rows = np.column_stack([values, np.asarray(results)])
    columns = (config.swept,) + tuple(
        "var_quantum" if c in ("exact", "decoherence") else "var_classical"
        for c in config.curves
    )
    meta = {
        "panel": config.panel,
        "swept": config.swept,
        "t": config.t,
        "curves": ",".join(config.curves),
        "init_var_x": config.init.var_x,
        "init_var_p": config.init.var_p,
        "init_sigma": config.init.sigma,
        "hbar": config.hbar,
        **{f"fixed_{k}": v for k, v in sorted(config.fixed.items())},
    }
    return Dataset(columns=columns, rows=rows, meta=meta)


def run_figure1(panel: str, n_points: int = 200) -> Dataset:
    return run_sweep(figure1_config(panel, n_points))


def run_figure2(panel: str, n_points: int = 200) -> Dataset:
    return run_sweep(figure2_config(panel, n_points))


# ---------------------------------------------------------------------------
# Figure 3 and Table 1: kurtosis runs
# ---------------------------------------------------------------------------

#: calibrated defaults, see module docstring
FIG3_INIT_FOURTH = FourthMomentVector(x4=50.0, x3p=23.65, x2p2=-22.35,
                                      xp3=0.13, p4=20.68)

FIG3_PARAMS = OscillatorParams(m=20.0, gamma=1e-3, omega=0.018, kbt=0.38)

TABLE1_TIMES = (40.0, 60.0, 80.0, 100.0)

#: printed reference rows; data only, never recomputed
TABLE1_REFERENCE = {
    "evidence": (12.0, 11.0, 7.0, 7.0),
    "free": (14.4, 13.61, 11.8, 10.0),
    "harmonic": (15.3, 13.65, 9.8, 6.4),
}


@dataclass(frozen=True)
class KurtosisRunConfig:
    """One kurtosis trajectory run.

    `fourth` may be an explicit FourthMomentVector or a dict of overrides
    applied on top of the Gaussian (Wick) completion of `init`; None means
    pure Gaussian completion.
    """

    params: OscillatorParams
    model: str = "harmonic"  # "harmonic" or "free"
    init: QuadraticState = QuadraticState(var_x=0.5, var_p=0.5)
    fourth: object = None
    t_end: float = 200.0
    n_points: int = 801
    method: str = "rk"

    def __post_init__(self):
        if self.model not in ("harmonic", "free"):
            raise ModelError(f"model must be 'harmonic' or 'free', got {self.model!r}")
        if self.t_end <= 0.0 or self.n_points < 2:
            raise ModelError("need t_end > 0 and n_points >= 2")

    def effective_params(self) -> OscillatorParams:
        return self.params.replace(omega=0.0) if self.model == "free" else self.params

    def initial_fourth(self) -> FourthMomentVector:
        if isinstance(self.fourth, FourthMomentVector):
            return self.fourth
        wick = gaussian_fourth_moments(self.init, hbar=self.params.hbar)
        if self.fourth is None:
            return wick
        vals = {k: getattr(wick, k) for k in ("x4", "x3p", "x2p2", "xp3", "p4")}
        unknown = set(self.fourth) - set(vals)
        if unknown:
            raise ModelError(f"unknown fourth-moment override(s) {sorted(unknown)!r}")
        vals.update(self.fourth)
        return FourthMomentVector(**vals)

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_points)


def run_kurtosis(config: KurtosisRunConfig) -> MomentSeries:
    state = MomentState(time=0.0, quad=config.init, fourth=config.initial_fourth())
    opts = TrajectoryOptions(method=config.method)
    return compute_series(config.effective_params(), state, config.grid(), opts)


def figure3_config(model: str, method: str = "rk") -> KurtosisRunConfig:
    return KurtosisRunConfig(
        params=FIG3_PARAMS,
        model=model,
        fourth=FIG3_INIT_FOURTH,
        method=method,
    )


def run_figure3(method: str = "rk"):
    """Harmonic and free kurtosis series over t in [0, 200] minutes."""
    harmonic = run_kurtosis(figure3_config("harmonic", method))
    free = run_kurtosis(figure3_config("free", method))
    return harmonic, free


def _fig3_meta() -> dict:
    f = FIG3_INIT_FOURTH
    return {
        "m": FIG3_PARAMS.m,
        "gamma": FIG3_PARAMS.gamma,
        "omega": FIG3_PARAMS.omega,
        "kbt": FIG3_PARAMS.kbt,
        "hbar": FIG3_PARAMS.hbar,
        "time_unit": "min",
        "init_var_x": 0.5,
        "init_var_p": 0.5,
        "init_sigma": 0.0,
        "init_x4": f.x4,
        "init_x3p": f.x3p,
        "init_x2p2": f.x2p2,
        "init_xp3": f.xp3,
        "init_p4": f.p4,
        "init_note": "fourth moments calibrated to the reference kurtosis table",
    }


def figure3_dataset(harmonic: MomentSeries, free: MomentSeries) -> Dataset:
    rows = np.column_stack([
        harmonic.times,
        harmonic.kurtosis,
        free.kurtosis,
        harmonic.var_x(),
        free.var_x(),
    ])
    return Dataset(
        columns=("t", "kappa_harmonic", "kappa_free", "var_x_harmonic", "var_x_free"),
        rows=rows,
        meta={"kind": "kurtosis", **_fig3_meta()},
    )


def run_table1(method: str = "rk") -> Dataset:
    """Kurtosis at the four reference times with the printed rows attached
    for comparison (reference rows are data, never recomputed)."""
    harmonic, free = run_figure3(method)
    rows = []
    for i, t in enumerate(TABLE1_TIMES):
        rows.append([
            t,
            free.kurtosis_at(t),
            harmonic.kurtosis_at(t),
            TABLE1_REFERENCE["free"][i],
            TABLE1_REFERENCE["harmonic"][i],
            TABLE1_REFERENCE["evidence"][i],
        ])
    return Dataset(
        columns=("t", "kappa_free", "kappa_harmonic", "ref_free", "ref_harmonic",
                 "ref_evidence"),
        rows=np.array(rows),
        meta={"kind": "table1", **_fig3_meta()},
    )
