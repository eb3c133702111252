import warnings

import numpy as np
import pytest

from twrsim import ClockParams, NoiseModel, Scene, TimingConfig

# 1.5 m separation, the default scene.
TOF = 5e-9
R_REF = 6.96e-21


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ideal():
    return ClockParams(), ClockParams()


@pytest.fixture
def noiseless():
    return NoiseModel.noiseless()


@pytest.fixture
def ref_timing():
    return TimingConfig(dt32=3.5e-4, dt53=1.9e-3, processing_T=7.2e-3)


@pytest.fixture(autouse=True)
def _quiet_tof_margin_warning():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="dt32=.*not much longer")
        yield
