import json
import os
from pathlib import Path
from typing import Any, Literal, TypeVar

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, computed_field, model_validator


class ConfigError(ValueError):
    """A configuration or data file that cannot be used (maps to CLI exit code 2)."""

    def __init__(self, reason: str, *, source: str | None = None, location: str | None = None):
        prefix = source or "<config>"
        if location:
            prefix = f"{prefix} [{location}]"
        super().__init__(f"{prefix}: {reason}")
        self.reason = reason
        self.source = source
        self.location = location


class TractionParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    p1: float = Field(gt=0, description="constant-torque plateau, kN")
    p2: float = Field(default=0.0, ge=0, description="speed offset, m/s")
    v1: float = Field(gt=0, description="corner speed, m/s")

    @computed_field  # type: ignore[prop-decorator]
    @property
    def q1(self) -> float:
        # continuity at the corner speed: q1 / (v1 + p2) == p1
        return self.p1 * (self.v1 + self.p2)


class BrakingParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    p3: float = Field(gt=0, description="fixed-torque braking force, kN")
    p4: float = Field(default=0.0, ge=0, description="speed offset, m/s")
    v2: float = Field(gt=0, description="corner speed, m/s")

    @computed_field  # type: ignore[prop-decorator]
    @property
    def q2(self) -> float:
        return self.p3 * (self.v2 + self.p4)


class ResistanceParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda1: float = Field(gt=0, description="kN/(m/s)^2")
    lambda2: float = Field(ge=0, description="kN/(m/s)")
    lambda3: float = Field(gt=0, description="kN")


class TrainPhysics(BaseModel):
    """Single-train physical constants. Repository defaults live in data/default_physics.json."""

    model_config = ConfigDict(frozen=True)

    mass: float = Field(gt=0, description="kg")
    speed_limit: float = Field(default=80.0 / 3.6, gt=0, description="m/s")
    traction: TractionParams
    braking: BrakingParams
    resistance: ResistanceParams
    beta1: float = Field(gt=0, le=1)
    beta2: float = Field(gt=0, le=1)
    beta3: float = Field(gt=0, le=1)
    gravity_component: float = Field(default=0.0, description="G*sin(theta), kN, constant along the line")


class FleetConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_trains: int = Field(default=20, ge=0)
    headway: float = Field(default=120.0, gt=0, description="s")
    trains_up: int = Field(default=10, ge=0)
    trains_down: int = Field(default=10, ge=0)

    @model_validator(mode="after")
    def _split_matches_total(self) -> "FleetConfig":
        if self.trains_up + self.trains_down != self.num_trains:
            raise ValueError(
                f"trains_up + trains_down ({self.trains_up} + {self.trains_down}) != num_trains ({self.num_trains})"
            )
        return self


class DisturbanceConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    probability_per_stop: float = Field(default=0.3, ge=0, le=1)
    max_extra_dwell: float = Field(default=30.0, ge=0, description="s")
    distribution: Literal["uniform", "truncated-exponential"] = "uniform"
    # scale of the exponential before truncation to [0, max_extra_dwell]; None -> max_extra_dwell / 3
    exponential_scale: float | None = Field(default=None, gt=0)
    seed: int = Field(default=0, ge=0, lt=2**64, description="stream seed of a NetworkSimulation built without an rng")


class ActionBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    cruise_min_kmh: float = Field(default=40.0, gt=0)
    cruise_max_kmh: float = Field(default=80.0, gt=0)
    dwell_min: float = Field(default=15.0, ge=0)
    dwell_max: float = Field(default=60.0, ge=0)

    @model_validator(mode="after")
    def _ordered(self) -> "ActionBounds":
        if self.cruise_min_kmh > self.cruise_max_kmh:
            raise ValueError("cruise_min_kmh must not exceed cruise_max_kmh")
        if self.dwell_min > self.dwell_max:
            raise ValueError("dwell_min must not exceed dwell_max")
        return self


class EnvConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    fleet: FleetConfig = FleetConfig()
    disturbance: DisturbanceConfig = DisturbanceConfig()
    bounds: ActionBounds = ActionBounds()
    reward_scale: float = Field(default=100.0, gt=0, description="seconds of overlap per unit reward")
    dt: float = Field(default=0.1, gt=0, description="integration step, s")
    time_horizon: float = Field(default=7200.0, gt=0, description="normalisation of time-point features, s")
    cruise_resolution_kmh: float = Field(default=0.5, ge=0, description="grid for mapped cruise commands; 0 = none")
    strict_order: bool = False
    seed: int = Field(default=0, ge=0, lt=2**64, description="episode seed when none is given")


class PpoConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_steps: int = Field(default=480, gt=0)
    batch_size: int = Field(default=64, gt=0)
    gamma: float = Field(default=0.99, gt=0, le=1)
    clip_range: float = Field(default=0.2, gt=0, lt=1)
    vf_coef: float = Field(default=0.5, ge=0)
    ent_coef: float = Field(default=0.1, ge=0)
    learning_rate: float = Field(default=3e-4, ge=0)
    epochs_per_update: int = Field(default=10, gt=0)
    total_iterations: int = Field(default=1000, gt=0)
    hidden_sizes: tuple[int, ...] = (64, 64)
    log_std_init: float = 0.0
    checkpoint_every: int = Field(default=50, gt=0)
    seed: int = Field(default=0, ge=0, lt=2**64)


class RunConfig(BaseModel):
    """Paths of every input file plus the output directory of one CLI job."""

    line_file: Path
    physics_file: Path
    env_file: Path
    ppo_file: Path
    out_dir: Path


_M = TypeVar("_M", bound=BaseModel)


def _format_location(loc: tuple[Any, ...]) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def read_json_file(path: str | os.PathLike[str]) -> Any:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError("file not found", source=str(path))
    except json.JSONDecodeError as error:
        raise ConfigError(error.msg, source=str(path), location=f"line {error.lineno}, column {error.colno}")


def validate_model(model: type[_M], data: Any, *, source: str | None = None) -> _M:
    """Validate raw data into `model`, converting the first pydantic error into a ConfigError."""
    try:
        return model.model_validate(data)
    except ValidationError as error:
        first = error.errors()[0]
        raise ConfigError(first["msg"], source=source, location=_format_location(first["loc"]))


def load_physics(path: str | os.PathLike[str]) -> TrainPhysics:
    return validate_model(TrainPhysics, read_json_file(path), source=str(path))


def load_env_config(path: str | os.PathLike[str]) -> EnvConfig:
    return validate_model(EnvConfig, read_json_file(path), source=str(path))


def load_ppo_config(path: str | os.PathLike[str]) -> PpoConfig:
    return validate_model(PpoConfig, read_json_file(path), source=str(path))


def load_run_config(path: str | os.PathLike[str]) -> RunConfig:
    """Load a run file; relative paths inside it resolve against the file's own directory."""
    raw = read_json_file(path)
    if not isinstance(raw, dict):
        raise ConfigError("run config must be a JSON object", source=str(path))
    base = Path(path).parent
    resolved = {key: str(base / value) if key != "out_dir" and isinstance(value, str) else value
                for key, value in raw.items()}
    defaults = config.default_run_config().model_dump(mode="json")
    return validate_model(RunConfig, {**defaults, **resolved}, source=str(path))


class _Config:
    LINE_FILE: str
    PHYSICS_FILE: str
    ENV_FILE: str
    PPO_FILE: str
    OUT_DIR: str
    LOG_LEVEL: str

    def __init__(self):
        load_dotenv()

        self.LINE_FILE = os.getenv("METRO_LINE_FILE", "./data/xiamen_line1.csv")
        self.PHYSICS_FILE = os.getenv("METRO_PHYSICS_FILE", "./data/default_physics.json")
        self.ENV_FILE = os.getenv("METRO_ENV_FILE", "./data/env.json")
        self.PPO_FILE = os.getenv("METRO_PPO_FILE", "./data/ppo.json")
        self.OUT_DIR = os.getenv("METRO_OUT_DIR", "./runs")
        self.LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    def default_run_config(self) -> RunConfig:
        return RunConfig(
            line_file=Path(self.LINE_FILE),
            physics_file=Path(self.PHYSICS_FILE),
            env_file=Path(self.ENV_FILE),
            ppo_file=Path(self.PPO_FILE),
            out_dir=Path(self.OUT_DIR),
        )


config = _Config()
