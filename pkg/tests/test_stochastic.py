import math

import numpy as np
import pytest

from qbo.closed_form import classical_variance
from qbo.model import ModelError, OscillatorParams, QuadraticState
from qbo.stochastic import EnsembleSpec, StepTooLarge, UnstableStep, simulate


class TestEnsembleSpec:
    def test_rejects_bad_fields(self):
        with pytest.raises(ModelError):
            EnsembleSpec(n_traj=0, dt=1e-3, t_end=1.0, seed=1)
        with pytest.raises(ModelError):
            EnsembleSpec(n_traj=10, dt=0.0, t_end=1.0, seed=1)
        with pytest.raises(ModelError):
            EnsembleSpec(n_traj=10, dt=1e-3, t_end=-1.0, seed=1)

    def test_dt_bound_enforced(self, std_params):
        spec = EnsembleSpec(n_traj=10, dt=0.2, t_end=1.0, seed=1)
        with pytest.raises(StepTooLarge):
            simulate(std_params, spec, [1.0])

    def test_dt_bound_override_warns(self, std_params):
        spec = EnsembleSpec(n_traj=10, dt=0.2, t_end=1.0, seed=1, allow_large_dt=True)
        with pytest.warns(UserWarning, match="stability bound"):
            simulate(std_params, spec, [1.0])


class TestNoiselessLimit:
    def test_deterministic_oscillator(self):
        # kbt = 0, gamma = 0, point mass at (1, 0): every trajectory follows
        # x(t) = cos(omega t) exactly; the empirical variance of identical
        # values is zero up to the ulp^2 left by rounding of the mean
        params = OscillatorParams(m=1.0, gamma=0.0, omega=1.0, kbt=0.0)
        dt = 1e-4
        spec = EnsembleSpec(
            n_traj=64, dt=dt, t_end=1.0, seed=3,
            init=QuadraticState(mean_x=1.0, mean_p=0.0),
        )
        res = simulate(params, spec, [0.5, 1.0])
        ulp2 = (4.0 * np.finfo(float).eps) ** 2
        for i, t in enumerate(res.times):
            assert res.var_x[i] <= ulp2 and res.var_p[i] <= ulp2
            # Euler-Maruyama phase error is O(dt) over t/dt steps
            assert abs(res.mean_x[i] - math.cos(t)) < 5e-4


class TestAgainstClassicalVariance:
    def test_variance_within_four_standard_errors(self, std_params):
        spec = EnsembleSpec(n_traj=20_000, dt=1e-3, t_end=3.0, seed=20260808,
                            init=QuadraticState.classical())
        res = simulate(std_params, spec, [1.0, 3.0])
        for i, t in enumerate(res.times):
            dev = abs(res.var_x[i] - classical_variance(std_params, t))
            assert dev <= 4.0 * res.se_var_x[i]

    def test_equipartition_and_gaussian_tail(self, std_params):
        # gamma t = 5 at the sample: stationary, Gaussian: kurtosis -> 3
        spec = EnsembleSpec(n_traj=30_000, dt=1e-3, t_end=10.0, seed=7,
                            init=QuadraticState.classical())
        res = simulate(std_params, spec, [10.0])
        assert abs(res.var_p[0] / std_params.m - std_params.kbt) <= 4.0 * res.se_var_p[0]
        kurt = res.x4[0] / res.var_x[0] ** 2
        se_kurt = math.sqrt(24.0 / spec.n_traj)  # Gaussian null
        assert abs(kurt - 3.0) <= 4.0 * se_kurt

    def test_diffusion_coefficient_self_check(self, std_params):
        # from a point mass, <p^2>(t1)/t1 -> 4 m gamma kbt as t1 -> 0
        dt = 1e-3
        t1 = 2 * dt
        spec = EnsembleSpec(n_traj=50_000, dt=dt, t_end=t1, seed=11,
                            init=QuadraticState.classical())
        res = simulate(std_params, spec, [t1])
        slope = res.var_p[0] / t1
        target = 4 * std_params.m * std_params.gamma * std_params.kbt
        # 4 SE statistical band plus the O(gamma t1) discretization bias
        band = 4.0 * res.se_var_p[0] / t1 + 2.0 * std_params.gamma * t1 * target
        assert abs(slope - target) <= band


class TestDeterminism:
    def test_bit_exact_rerun(self, std_params):
        spec = EnsembleSpec(n_traj=2_000, dt=1e-3, t_end=1.0, seed=99,
                            init=QuadraticState(var_x=0.3, var_p=0.8, sigma=0.2))
        a = simulate(std_params, spec, [0.5, 1.0])
        b = simulate(std_params, spec, [0.5, 1.0])
        for f in ("mean_x", "mean_p", "var_x", "var_p", "sigma", "x4", "se_x4"):
            assert np.array_equal(getattr(a, f), getattr(b, f))

    def test_block_size_cannot_change_results(self, std_params):
        spec = EnsembleSpec(n_traj=1_500, dt=1e-3, t_end=1.0, seed=42,
                            init=QuadraticState(var_x=0.3, var_p=0.8, sigma=0.2))
        a = simulate(std_params, spec, [1.0], block_size=8192)
        b = simulate(std_params, spec, [1.0], block_size=97)
        for f in ("mean_x", "var_x", "var_p", "sigma", "x4"):
            assert np.array_equal(getattr(a, f), getattr(b, f))

    def test_thread_count_cannot_change_results(self, std_params, monkeypatch):
        spec = EnsembleSpec(n_traj=3_000, dt=1e-3, t_end=0.5, seed=5,
                            init=QuadraticState.classical())
        a = simulate(std_params, spec, [0.5])
        monkeypatch.setenv("QBO_THREADS", "1")
        b = simulate(std_params, spec, [0.5])
        assert np.array_equal(a.var_x, b.var_x) and np.array_equal(a.x4, b.x4)

    def test_stream_contract_matches_fresh_generators(self, std_params):
        # trajectory i consumes exactly Philox(key=(seed, i)) in order:
        # 2 init draws, then one draw per step
        seed, n_steps, dt = 123, 50, 1e-3
        spec = EnsembleSpec(n_traj=3, dt=dt, t_end=n_steps * dt, seed=seed,
                            init=QuadraticState(var_x=1.0, var_p=1.0))
        res = simulate(std_params, spec, [n_steps * dt])
        m, g, w2 = std_params.m, std_params.gamma, std_params.omega**2
        kick = math.sqrt(4 * m * g * std_params.kbt * dt)
        xs = []
        for i in range(3):
            gen = np.random.Generator(
                np.random.Philox(key=np.array([seed, i], dtype=np.uint64))
            )
            z = gen.standard_normal(2)
            x, p = z[0], z[1]
            for _ in range(n_steps):
                xn = x + dt * p / m
                pn = p - dt * (m * w2 * x + 2 * g * p) + kick * gen.standard_normal()
                x, p = xn, pn
            xs.append(x)
        # chain-map evaluation reorders float ops; agreement is to round-off
        assert abs(np.mean(xs) - res.mean_x[0]) < 1e-12


class TestOverflowGuard:
    def test_unstable_step_reported(self):
        params = OscillatorParams(m=1.0, gamma=0.0, omega=500.0, kbt=0.0)
        spec = EnsembleSpec(n_traj=8, dt=0.05, t_end=50.0, seed=1,
                            init=QuadraticState(mean_x=1.0), allow_large_dt=True)
        with pytest.warns(UserWarning):
            with pytest.raises(UnstableStep, match="dt"):
                simulate(params, spec, [50.0])


class TestWeakConvergence:
    def test_halving_dt_moves_variance_less_than_one_se(self, std_params):
        res = {}
        for dt in (2e-3, 1e-3):
            spec = EnsembleSpec(n_traj=40_000, dt=dt, t_end=2.0, seed=314,
                                init=QuadraticState.classical())
            res[dt] = simulate(std_params, spec, [2.0])
        diff = abs(res[2e-3].var_x[0] - res[1e-3].var_x[0])
        assert diff < 1.0 * max(res[2e-3].se_var_x[0], res[1e-3].se_var_x[0]) * 2
