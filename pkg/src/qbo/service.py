"""HTTP service wrapping the engine.

Every endpoint is a pure function of its request body: the same runs the
CLI performs, returned as JSON datasets with the resolved configuration
echoed back, so clients can reproduce any response offline.
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .closed_form import (
    classical_variance,
    decoherence_variance,
    exact_variance,
    free_particle_variance,
)
from .experiments import (
    KurtosisRunConfig,
    figure1_config,
    figure2_config,
    run_kurtosis,
    run_sweep,
    run_table1,
)
from .model import ModelError, OscillatorParams, QuadraticState
from .stochastic import EnsembleSpec, simulate

__all__ = ["create_app"]


class ParamsIn(BaseModel):
    m: float = Field(description="mass / inertia, > 0")
    gamma: float = Field(ge=0.0)
    omega: float = Field(ge=0.0)
    kbt: float = Field(ge=0.0)
    hbar: float = Field(default=1.0, gt=0.0)

    def build(self) -> OscillatorParams:
        return OscillatorParams(**self.model_dump())


class QuadInitIn(BaseModel):
    var_x: float = Field(default=0.0, ge=0.0)
    var_p: float = Field(default=0.0, ge=0.0)
    sigma: float = 0.0
    mean_x: float = 0.0
    mean_p: float = 0.0

    def build(self) -> QuadraticState:
        return QuadraticState(**self.model_dump())


class FourthIn(BaseModel):
    """Explicit overrides on top of the Gaussian completion."""

    x4: Optional[float] = None
    x3p: Optional[float] = None
    x2p2: Optional[float] = None
    xp3: Optional[float] = None
    p4: Optional[float] = None

    def overrides(self) -> dict:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class VarianceRequest(BaseModel):
    model: Literal["exact", "classical", "decoherence", "free"]
    params: ParamsIn
    init: QuadInitIn = QuadInitIn()
    t: Optional[float] = None
    t_grid: Optional[tuple[float, float, int]] = None


class VarianceResponse(BaseModel):
    model: str
    times: list[float]
    values: list[float]
    config: dict


class KurtosisRequest(BaseModel):
    model: Literal["harmonic", "free"] = "harmonic"
    method: Literal["rk", "semianalytic"] = "rk"
    params: ParamsIn = ParamsIn(m=20.0, gamma=1e-3, omega=0.018, kbt=0.38)
    init: QuadInitIn = QuadInitIn(var_x=0.5, var_p=0.5)
    fourth: Optional[FourthIn] = None
    use_reference_fourth: bool = Field(
        default=True,
        description="start from the calibrated reference fourth moments "
        "instead of plain Gaussian completion",
    )
    t_end: float = Field(default=200.0, gt=0.0)
    n_points: int = Field(default=801, ge=2)


class KurtosisResponse(BaseModel):
    model: str
    method: str
    times: list[float]
    kurtosis: list[float]
    var_x: list[float]
    init_fourth: dict
    config: dict


class SweepRequest(BaseModel):
    figure: Literal[1, 2]
    panel: Literal["left", "middle", "right"]
    n_points: int = Field(default=200, ge=1, le=100_000)


class DatasetResponse(BaseModel):
    columns: list[str]
    rows: list[list[float]]
    meta: dict


class MonteCarloRequest(BaseModel):
    params: ParamsIn
    init: QuadInitIn = QuadInitIn()
    n_traj: int = Field(default=10_000, ge=1, le=10_000_000)
    dt: float = Field(gt=0.0)
    t_end: float = Field(ge=0.0)
    seed: int = 0
    sample_times: list[float]
    allow_large_dt: bool = False


class MonteCarloResponse(BaseModel):
    times: list[float]
    n_traj: int
    moments: dict
    standard_errors: dict
    config: dict


class CheckOut(BaseModel):
    name: str
    passed: bool
    detail: str
    seconds: float


class ValidateResponse(BaseModel):
    passed: bool
    checks: list[CheckOut]


_VARIANCE_FUNCS = {
    "exact": lambda p, init, t: exact_variance(p, init, t),
    "classical": lambda p, init, t: classical_variance(p, t),
    "decoherence": lambda p, init, t: decoherence_variance(p, init, t),
    "free": lambda p, init, t: free_particle_variance(p, init, t),
}


def create_app() -> FastAPI:
    app = FastAPI(
        title="qbo",
        version=__version__,
        description="Moment dynamics of the damped quantum Brownian oscillator",
    )

    @app.exception_handler(ModelError)
    async def model_error(request, exc: ModelError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/variance", response_model=VarianceResponse)
    def variance(req: VarianceRequest):
        if (req.t is None) == (req.t_grid is None):
            raise HTTPException(422, "exactly one of t or t_grid is required")
        params_in = req.params
        if req.model == "free":
            params_in = params_in.model_copy(update={"omega": 0.0})
        try:
            params = params_in.build()
            init = req.init.build()
            if req.t is not None:
                times = [float(req.t)]
            else:
                start, stop, count = req.t_grid
                times = [float(v) for v in np.linspace(start, stop, int(count))]
            fn = _VARIANCE_FUNCS[req.model]
            values = [fn(params, init, t) for t in times]
        except ModelError as exc:
            raise HTTPException(422, str(exc))
        return VarianceResponse(
            model=req.model, times=times, values=values,
            config={"params": params.as_dict(), "init": req.init.model_dump()},
        )

    @app.post("/kurtosis", response_model=KurtosisResponse)
    def kurtosis(req: KurtosisRequest):
        try:
            fourth: object
            if req.use_reference_fourth and req.fourth is None:
                from .experiments import FIG3_INIT_FOURTH

                fourth = FIG3_INIT_FOURTH
            else:
                fourth = req.fourth.overrides() if req.fourth else None
            config = KurtosisRunConfig(
                params=req.params.build(),
                model=req.model,
                init=req.init.build(),
                fourth=fourth,
                t_end=req.t_end,
                n_points=req.n_points,
                method=req.method,
            )
            series = run_kurtosis(config)
            f0 = config.initial_fourth()
        except ModelError as exc:
            raise HTTPException(422, str(exc))
        return KurtosisResponse(
            model=req.model,
            method=req.method,
            times=[float(t) for t in series.times],
            kurtosis=[float(k) for k in series.kurtosis],
            var_x=[float(v) for v in series.var_x()],
            init_fourth={k: getattr(f0, k) for k in ("x4", "x3p", "x2p2", "xp3", "p4")},
            config={"params": req.params.model_dump(), "init": req.init.model_dump(),
                    "t_end": req.t_end, "n_points": req.n_points},
        )

    @app.post("/sweep", response_model=DatasetResponse)
    def sweep(req: SweepRequest):
        cfg = (figure1_config if req.figure == 1 else figure2_config)(
            req.panel, n_points=req.n_points
        )
        ds = run_sweep(cfg)
        return DatasetResponse(
            columns=list(ds.columns),
            rows=[[float(v) for v in row] for row in ds.rows],
            meta={k: str(v) for k, v in ds.meta.items()},
        )

    @app.get("/table1", response_model=DatasetResponse)
    def table1():
        ds = run_table1()
        return DatasetResponse(
            columns=list(ds.columns),
            rows=[[float(v) for v in row] for row in ds.rows],
            meta={k: str(v) for k, v in ds.meta.items()},
        )

    @app.post("/montecarlo", response_model=MonteCarloResponse)
    def montecarlo(req: MonteCarloRequest):
        try:
            spec = EnsembleSpec(
                n_traj=req.n_traj, dt=req.dt, t_end=req.t_end, seed=req.seed,
                init=req.init.build(), allow_large_dt=req.allow_large_dt,
            )
            res = simulate(req.params.build(), spec, req.sample_times)
        except ModelError as exc:
            raise HTTPException(422, str(exc))
        fields = ("mean_x", "mean_p", "var_x", "var_p", "sigma", "x4")
        return MonteCarloResponse(
            times=[float(t) for t in res.times],
            n_traj=res.n_traj,
            moments={f: [float(v) for v in getattr(res, f)] for f in fields},
            standard_errors={
                f: [float(v) for v in getattr(res, "se_" + f)] for f in fields
            },
            config={"params": req.params.model_dump(), "dt": req.dt,
                    "seed": req.seed, "n_traj": req.n_traj},
        )

    @app.post("/validate", response_model=ValidateResponse)
    def validate(names: Optional[list[str]] = None):
        from .validation import run_checks

        results = run_checks(names)
        return ValidateResponse(
            passed=all(r.passed for r in results),
            checks=[CheckOut(name=r.name, passed=r.passed, detail=r.detail,
                             seconds=r.seconds) for r in results],
        )

    return app
