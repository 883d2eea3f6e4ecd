"""Decision-process view of the line simulation.

One step is one departure decision: the deciding train gets a cruise speed for
its next segment and a dwell for the station it arrives at, then the line runs
until the next departure needs a command. The reward is the overlap time
accumulated since the previous step.
"""

import logging
from typing import Any, NamedTuple

import gymnasium as gym
import numpy as np
from gymnasium import spaces

from src.config import ActionBounds, EnvConfig, TrainPhysics
from src.dynamics import Direction, Phase
from src.interfaces.ledger import EnergyLedger
from src.interfaces.line import LineDataset
from src.interfaces.reports import DecisionRecord, EpisodeSummary
from src.network_sim import DecisionRequest, NetworkSimulation, TrainRun

logger = logging.getLogger(__name__)

FEATURES_PER_TRAIN = 8
KMH_PER_MS = 3.6


class EpisodeFinishedError(RuntimeError):
    pass


class StepResult(NamedTuple):
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    info: dict[str, Any]


def map_action(raw: np.ndarray | tuple[float, float], bounds: ActionBounds) -> tuple[float, float]:
    """Affine map of a raw action in [-1, 1]^2 to (cruise speed m/s, dwell s).

    Components outside [-1, 1] are clamped; NaN is read as the midpoint.
    """
    r = np.clip(np.nan_to_num(np.asarray(raw, dtype=np.float64).reshape(2), nan=0.0), -1.0, 1.0)
    cruise_kmh = bounds.cruise_min_kmh + (r[0] + 1.0) / 2.0 * (bounds.cruise_max_kmh - bounds.cruise_min_kmh)
    dwell = bounds.dwell_min + (r[1] + 1.0) / 2.0 * (bounds.dwell_max - bounds.dwell_min)
    return float(cruise_kmh) / KMH_PER_MS, float(dwell)


def quantize_cruise(cruise_speed: float, bounds: ActionBounds, resolution_kmh: float) -> float:
    """Snap a cruise command (m/s) to the resolution grid, staying inside the bounds."""
    if resolution_kmh <= 0:
        return cruise_speed
    kmh = round(cruise_speed * KMH_PER_MS / resolution_kmh) * resolution_kmh
    return min(max(kmh, bounds.cruise_min_kmh), bounds.cruise_max_kmh) / KMH_PER_MS


def _time_feature(t: float, horizon: float, dt: float) -> float:
    """-1 until the event happens; afterwards affine in t on (-1, 1], so an event at t=0 sits one tick above -1."""
    if t < 0:
        return -1.0
    return float(np.clip(2.0 * (t + dt) / (horizon + dt) - 1.0, -1.0, 1.0))


class MetroTimetableEnv(gym.Env):
    """Gymnasium environment over a `NetworkSimulation`.

    Observation: flattened (num_trains, 8) matrix of per-train features
    [t_accel, t_cruise, t_brake, t_dwell, location, distance_to_next, direction, terminal].
    Action: two values in [-1, 1], mapped to (cruise speed, dwell) inside the configured bounds.
    """

    metadata = {"render_modes": []}

    def __init__(self, line: LineDataset, physics: TrainPhysics, env_config: EnvConfig, *, trace: bool = False):
        self.line = line
        self.physics = physics
        self.env_config = env_config
        self.trace = trace
        self.num_trains = env_config.fleet.num_trains
        self.observation_space = spaces.Box(
            low=-1.0, high=1.0, shape=(self.num_trains * FEATURES_PER_TRAIN,), dtype=np.float64
        )
        self.action_space = spaces.Box(low=-1.0, high=1.0, shape=(2,), dtype=np.float64)
        self._total_m = line.total_length_m
        self.sim: NetworkSimulation | None = None
        self.decisions: list[DecisionRecord] = []
        self._decider: DecisionRequest | None = None
        self._last_overlap_ticks = 0
        self._episode_seed: int | None = None

    @property
    def deciding_train(self) -> int:
        return self._decider.train_id if self._decider is not None else -1

    @property
    def done(self) -> bool:
        return self.sim is not None and self.sim.finished

    def reset(self, *, seed: int | None = None, options: dict[str, Any] | None = None) -> tuple[np.ndarray, dict]:
        if seed is None and self._np_random is None:
            seed = self.env_config.seed
        super().reset(seed=seed)
        self._episode_seed = seed
        cfg = self.env_config
        self.sim = NetworkSimulation(
            self.line,
            self.physics,
            cfg.fleet,
            cfg.disturbance,
            dt=cfg.dt,
            rng=self.np_random,
            strict_order=cfg.strict_order,
            trace=self.trace,
        )
        self.decisions = []
        self._last_overlap_ticks = 0
        pending = self.sim.start()
        self._decider = pending[0] if pending else None
        return self.observe(), self._info()

    def step(self, action: np.ndarray) -> StepResult:  # type: ignore[override]
        cruise, dwell = map_action(action, self.env_config.bounds)
        cruise = quantize_cruise(cruise, self.env_config.bounds, self.env_config.cruise_resolution_kmh)
        return self._apply(cruise, dwell)

    def _apply(self, cruise_speed: float, dwell: float) -> StepResult:
        if self.sim is None:
            raise RuntimeError("call reset() before step()")
        if self.sim.finished or self._decider is None:
            raise EpisodeFinishedError("episode is over; call reset()")
        decider = self._decider
        self.sim.dispatch(decider.train_id, cruise_speed, dwell)
        pending = self.sim.pending or self.sim.run_until_decision()
        self._decider = pending[0] if pending else None

        ledger = self.sim.ledger
        reward = (ledger.overlap_ticks - self._last_overlap_ticks) * ledger.dt / self.env_config.reward_scale
        self._last_overlap_ticks = ledger.overlap_ticks
        self.decisions.append(
            DecisionRecord(
                t=decider.time,
                train=decider.train_id,
                cruise_cmd_kmh=cruise_speed * KMH_PER_MS,
                dwell_cmd=0.0 if decider.terminal_segment else dwell,
                reward=reward,
            )
        )
        terminated = self.sim.finished
        if terminated:
            logger.debug(
                "episode finished at t=%.1f s: E_T=%.1f kWh, E_R=%.1f kWh, overlap=%.1f s",
                self.sim.total_time(), ledger.E_T, ledger.E_R, ledger.overlap_seconds,
            )
        return StepResult(self.observe(), reward, terminated, False, self._info())

    def _info(self) -> dict[str, Any]:
        assert self.sim is not None
        info: dict[str, Any] = {
            "deciding_train": self.deciding_train,
            "time": self.sim.now,
            "overlap_seconds": self.sim.ledger.overlap_seconds,
            "order_violations": self.sim.order_violations,
        }
        if self.sim.finished:
            info["ledger"] = self.sim.ledger.model_copy()
            info["total_time"] = self.sim.total_time()
        return info

    def observe(self) -> np.ndarray:
        """Features of every train at the current simulation time, flattened row-major."""
        if self.sim is None:
            raise RuntimeError("call reset() before observe()")
        tick = self.sim.tick
        rows = [self._train_features(run, tick) for run in self.sim.trains]
        if not rows:
            return np.zeros(0, dtype=np.float64)
        return np.concatenate(rows)

    def _train_features(self, run: TrainRun, tick: int) -> np.ndarray:
        assert self.sim is not None
        horizon = self.env_config.time_horizon
        stamps = run.stamps_at(tick, self.sim.dt)
        travelled = run.travelled(tick)
        location = travelled if run.direction is Direction.up else self._total_m - travelled
        if run.phase is Phase.finished:
            to_next = 0.0
        else:
            segment = run.current_segment
            assert segment is not None
            to_next = segment.distance_m - (travelled - run.completed_distance)
        return np.array(
            [
                _time_feature(stamps.accelerating, horizon, self.sim.dt),
                _time_feature(stamps.cruising, horizon, self.sim.dt),
                _time_feature(stamps.braking, horizon, self.sim.dt),
                _time_feature(stamps.dwelling, horizon, self.sim.dt),
                np.clip(location / self._total_m, -1.0, 1.0),
                np.clip(to_next / self._total_m, 0.0, 1.0),
                run.direction.sign,
                1.0 if run.phase is Phase.finished else 0.0,
            ],
            dtype=np.float64,
        )

    def summary(self) -> EpisodeSummary:
        if self.sim is None or not self.sim.finished:
            raise EpisodeFinishedError("no finished episode to summarise")
        return EpisodeSummary(
            seed=self._episode_seed,
            ledger=self.sim.ledger.model_copy(),
            total_time=self.sim.total_time(),
            order_violations=self.sim.order_violations,
            decisions=list(self.decisions),
        )

    def run_baseline(self, seed: int | None = None) -> EnergyLedger:
        """Full "no action" episode: every departure uses the segment's nominal cruise speed and dwell."""
        self.reset(seed=seed)
        assert self.sim is not None
        while not self.sim.finished:
            assert self._decider is not None
            run = self.sim.trains[self._decider.train_id]
            segment = run.current_segment
            assert segment is not None
            self._apply(segment.cruise_speed_ms, segment.nominal_dwell)
        ledger = self.sim.ledger.model_copy()
        logger.info(
            "baseline seed=%s: E_T=%.1f kWh, E_R=%.1f kWh, overlap=%.1f s, total_time=%.1f s",
            seed, ledger.E_T, ledger.E_R, ledger.overlap_seconds, self.sim.total_time(),
        )
        return ledger
