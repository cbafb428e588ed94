import warnings

import numpy as np
import pytest

from qbo.model import (
    MomentState,
    OscillatorParams,
    QuadraticState,
    gaussian_fourth_moments,
)


@pytest.fixture
def std_params():
    return OscillatorParams(m=1.0, gamma=0.5, omega=1.0, kbt=1.0)


@pytest.fixture
def fig3_params():
    return OscillatorParams(m=20.0, gamma=1e-3, omega=0.018, kbt=0.38)


@pytest.fixture
def generic_init():
    return QuadraticState(var_x=0.7, var_p=1.3, sigma=0.4)


@pytest.fixture
def generic_state(generic_init):
    return MomentState(0.0, generic_init, gaussian_fourth_moments(generic_init))


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)


@pytest.fixture(autouse=True)
def _no_uncertainty_warnings():
    # tests that explicitly probe the warning use pytest.warns themselves
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def rel_err(a, b, floor=1e-300):
    return abs(a - b) / max(abs(a), abs(b), floor)


def max_rel_err(a, b, floor=1e-300):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / scale))
