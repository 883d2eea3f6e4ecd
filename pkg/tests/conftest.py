from pathlib import Path

import pytest

from src.config import DisturbanceConfig, EnvConfig, FleetConfig, TrainPhysics, load_physics
from src.line_data import load_line, parse_line

DATA = Path(__file__).resolve().parents[1] / "data"

TOY_LINE = """from,to,distance_km,cruise_kmh,dwell_s
A,B,1.0,72.0,30
B,C,1.2,72.0,30
"""


@pytest.fixture(scope="session")
def physics() -> TrainPhysics:
    return load_physics(DATA / "default_physics.json")


@pytest.fixture(scope="session")
def xiamen_line():
    return load_line(DATA / "xiamen_line1.csv")


@pytest.fixture(scope="session")
def toy_line():
    return parse_line(TOY_LINE, name="toy")


def make_env_config(num_up: int = 1, num_down: int = 1, *, probability: float = 0.0, **kwargs) -> EnvConfig:
    return EnvConfig(
        fleet=FleetConfig(num_trains=num_up + num_down, headway=120.0, trains_up=num_up, trains_down=num_down),
        disturbance=DisturbanceConfig(probability_per_stop=probability, max_extra_dwell=30.0, seed=0),
        **kwargs,
    )
