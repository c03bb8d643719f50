import math
import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from leosec.channel import ArrayGeometry
from leosec.constellation import SatelliteId, SlotScene

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=1000,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

LAM = 0.0249827  # m, 12 GHz


def synthetic_scene(rng, num_eaves, gain_range=(1.0, 13.0), slot_index=1, wavelength=LAM):
    """Random single-slot scene; rho/sigma^2 per link is drawn from ``gain_range``."""
    k = 2 * math.pi / wavelength
    el = rng.uniform(0.3, 1.4, num_eaves + 1)
    az = rng.uniform(0, 2 * math.pi, num_eaves + 1)
    b = k * np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1)
    a = rng.uniform(*gain_range, num_eaves + 1)
    return SlotScene(
        slot_index=slot_index,
        time=0.0,
        serving=SatelliteId(1, 1),
        eavesdroppers=tuple(SatelliteId(2, i + 1) for i in range(num_eaves)),
        wave_vectors=b,
        distances=np.full(num_eaves + 1, 1e6),
        path_gains=a * 1e-18,
        noise_powers=np.full(num_eaves + 1, 1e-18),
        elevations=el,
        wavelength=wavelength,
    )


def random_geometry(rng, n, wavelength=LAM, side_lambda=3.0, d_min_lambda=0.5):
    side, d_min = side_lambda * wavelength, d_min_lambda * wavelength
    while True:
        g = ArrayGeometry(rng.uniform(0, side, (n, 2)), side, d_min)
        if g.is_feasible():
            return g


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def desk_scenes():
    from leosec.config import ExperimentConfig
    from leosec.experiment import build_experiment_scenes

    return build_experiment_scenes(ExperimentConfig())


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
