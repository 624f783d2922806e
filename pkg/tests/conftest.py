import os

import pytest

from ebstar.camera import CameraModel
from ebstar.catalog import load_catalog
from ebstar.earth import UtcInstant, parse_finals2000A
from ebstar.geometry import attitude_from_radec_roll
from ebstar.simulator import SimConfig, generate_events, static_site_trajectory

DATA = os.path.join(os.path.dirname(__file__), "..", "data")

T0_ISO = "2024-11-02T03:00:00Z"


@pytest.fixture(scope="session")
def eop_table():
    return parse_finals2000A(os.path.join(DATA, "finals2000A_excerpt.txt"))


@pytest.fixture(scope="session")
def cam400():
    """The 400 mm telescope optics used throughout."""
    return CameraModel(focal_length=0.4, pixel_pitch=4.86e-6, width=1280, height=720)


@pytest.fixture(scope="session")
def dense_catalog():
    return load_catalog(os.path.join(DATA, "dense_field.csv"), mag_limit=7.0)


@pytest.fixture(scope="session")
def t0():
    return UtcInstant.from_iso(T0_ISO)


@pytest.fixture(scope="session")
def desk_trajectory(eop_table, t0):
    att0 = attitude_from_radec_roll(11.0, 0.0, 0.0)
    return static_site_trajectory(att0, eop_table, t0)


@pytest.fixture(scope="session")
def sim_two_minutes(desk_trajectory, dense_catalog, cam400, t0):
    """120 s desk run with default noise; shared by tracker-level tests."""
    return generate_events(desk_trajectory, dense_catalog, cam400, SimConfig(seed=7), t0, 120.0)


@pytest.fixture(scope="session")
def sim_noiseless_minute(desk_trajectory, dense_catalog, cam400, t0):
    """60 s noiseless run; shared by the plate-solving tests."""
    cfg = SimConfig(seed=11, noise_rate=0.0)
    return generate_events(desk_trajectory, dense_catalog, cam400, cfg, t0, 60.0)
