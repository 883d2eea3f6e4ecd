"""Multi-train line simulation on a fixed tick grid.

Trains depart their origin at (m-1) * headway within their direction group,
run each segment along a cached `SegmentProfile`, dwell at every intermediate
station (commanded dwell plus a sampled disturbance), and finish at the
terminal without dwelling there. All trains share one electrical network, so
their traction and braking powers are summed every tick.
"""

import csv
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from src.config import DisturbanceConfig, FleetConfig, TrainPhysics
from src.dynamics import Direction, Phase, PhaseTimestamps, SegmentProfile, TrainState, traverse_segment
from src.interfaces.ledger import EnergyLedger
from src.interfaces.line import LineDataset, SegmentRecord
from src.line_data import reverse_direction

logger = logging.getLogger(__name__)

TRACE_HEADER = ("t", "P_T_sum_kW", "P_B_sum_kW", "P_R_kW", "overlap_flag")


class SimulationNotFinishedError(RuntimeError):
    pass


class PendingDecisionError(RuntimeError):
    """The world cannot advance while departures are waiting for commands."""


class OrderViolationError(RuntimeError):
    def __init__(self, leader: int, follower: int, time: float):
        super().__init__(f"train {follower} overtook train {leader} at t={time:.1f} s")
        self.leader = leader
        self.follower = follower
        self.time = time


@dataclass(frozen=True)
class DecisionRequest:
    train_id: int
    segment_index: int
    time: float
    terminal_segment: bool


def initial_departures(fc: FleetConfig) -> list[tuple[int, float]]:
    """(train_id, departure time) per train; up trains take ids 0..trains_up-1, down trains follow."""
    up = [(j, j * fc.headway) for j in range(fc.trains_up)]
    down = [(fc.trains_up + j, j * fc.headway) for j in range(fc.trains_down)]
    return up + down


def sample_disturbance(dc: DisturbanceConfig, rng: np.random.Generator) -> float:
    """Extra dwell t_eps for one stop, in [0, max_extra_dwell]."""
    if dc.probability_per_stop <= 0 or dc.max_extra_dwell <= 0:
        return 0.0
    if rng.random() >= dc.probability_per_stop:
        return 0.0
    if dc.distribution == "uniform":
        return float(rng.uniform(0.0, dc.max_extra_dwell))
    scale = dc.exponential_scale or dc.max_extra_dwell / 3.0
    u = rng.random()
    return float(-scale * math.log1p(-u * -math.expm1(-dc.max_extra_dwell / scale)))


def integrate_energy(ledger: EnergyLedger, trains: list[TrainState], phys: TrainPhysics, dt: float) -> EnergyLedger:
    """Fold one tick of the given trains' step-mean powers into the ledger."""
    if not math.isclose(ledger.dt, dt):
        raise ValueError(f"ledger tick {ledger.dt} s does not match step {dt} s")
    traction = np.array([sum(ts.step_traction_power for ts in trains)], dtype=np.float64)
    braking = np.array([sum(ts.step_braking_power for ts in trains)], dtype=np.float64)
    ledger.accumulate(traction, braking, phys.beta3)
    return ledger


@dataclass
class TrainRun:
    train_id: int
    direction: Direction
    segments: tuple[SegmentRecord, ...]
    depart_tick: int
    segment_index: int = 0
    phase: Phase = Phase.dwelling
    awaiting_command: bool = False
    profile: SegmentProfile | None = None
    arrive_tick: int = -1
    finish_tick: int = -1
    completed_distance: float = 0.0
    next_dwell: float = 0.0
    stamps: PhaseTimestamps = PhaseTimestamps()
    departures: list[float] = field(default_factory=list)
    arrivals: list[float] = field(default_factory=list)
    disturbances: list[float] = field(default_factory=list)
    commands: list[tuple[float, float]] = field(default_factory=list)

    @property
    def current_segment(self) -> SegmentRecord | None:
        return self.segments[self.segment_index] if self.segment_index < len(self.segments) else None

    def offset(self, tick: int) -> int:
        return tick - self.depart_tick

    def travelled(self, tick: int) -> float:
        """Metres travelled from the origin along the train's own direction."""
        if self.phase.moving and self.profile is not None:
            return self.completed_distance + float(self.profile.position[self.offset(tick)])
        return self.completed_distance

    def travelled_over(self, start: int, stop: int) -> np.ndarray:
        if self.phase.moving and self.profile is not None:
            return self.completed_distance + self.profile.position[self.offset(start):self.offset(stop)]
        return np.full(stop - start, self.completed_distance)

    def stamps_at(self, tick: int, dt: float) -> PhaseTimestamps:
        """Phase timestamps including events of the running segment that already happened."""
        if not (self.phase.moving and self.profile is not None):
            return self.stamps
        elapsed = self.offset(tick) * dt
        depart = self.depart_tick * dt
        cruising, braking = self.stamps.cruising, self.stamps.braking
        if 0 <= self.profile.cruise_start <= elapsed:
            cruising = depart + self.profile.cruise_start
        if 0 <= self.profile.brake_start <= elapsed:
            braking = depart + self.profile.brake_start
        return PhaseTimestamps(accelerating=depart, cruising=cruising, braking=braking, dwelling=self.stamps.dwelling)

    def state_at(self, tick: int, dt: float) -> TrainState:
        stamps = self.stamps_at(tick, dt)
        speed, position, phase = 0.0, 0.0, self.phase
        dwell_remaining = 0.0
        traction = braking = 0.0
        if phase.moving and self.profile is not None:
            k = self.offset(tick)
            speed, position = float(self.profile.speed[k]), float(self.profile.position[k])
            traction, braking = float(self.profile.traction_power[k]), float(self.profile.braking_power[k])
            elapsed = k * dt
            if 0 <= self.profile.brake_start <= elapsed:
                phase = Phase.braking
            elif 0 <= self.profile.cruise_start <= elapsed:
                phase = Phase.cruising
            else:
                phase = Phase.accelerating
        elif phase is Phase.dwelling:
            dwell_remaining = max(self.depart_tick - tick, 0) * dt
        cruise_cmd, dwell_cmd = self.commands[-1] if self.commands else (0.0, 0.0)
        return TrainState(
            train_id=self.train_id,
            direction=self.direction,
            segment_index=min(self.segment_index, len(self.segments) - 1),
            position_in_segment=position,
            speed=speed,
            phase=phase,
            dwell_remaining=dwell_remaining,
            commanded_cruise_speed=cruise_cmd,
            commanded_next_dwell=dwell_cmd,
            phase_timestamps=stamps,
            step_traction_power=traction,
            step_braking_power=braking,
        )


class NetworkSimulation:
    """One simulated operating run; a strictly sequential state machine.

    Usage: `start()` returns the departures due at t=0; each returned request
    must be answered with `dispatch()` before `advance()` / `run_until_decision()`.
    """

    def __init__(
        self,
        line: LineDataset,
        physics: TrainPhysics,
        fleet: FleetConfig,
        disturbance: DisturbanceConfig,
        *,
        dt: float = 0.1,
        rng: np.random.Generator | None = None,
        strict_order: bool = False,
        trace: bool = False,
    ):
        self.line = line
        self.physics = physics
        self.fleet = fleet
        self.disturbance = disturbance
        self.dt = dt
        self.rng = rng if rng is not None else np.random.default_rng(disturbance.seed)
        self.strict_order = strict_order
        self.tick = 0
        self.ledger = EnergyLedger(dt=dt)
        self.pending: list[DecisionRequest] = []
        self.order_violations = 0
        self._inverted: set[tuple[int, int]] = set()
        self._trace: list[tuple[int, np.ndarray, np.ndarray, np.ndarray]] | None = [] if trace else None

        by_direction = {Direction.up: line.segments, Direction.down: reverse_direction(line).segments}
        self.trains: list[TrainRun] = []
        for train_id, departure in initial_departures(fleet):
            direction = Direction.up if train_id < fleet.trains_up else Direction.down
            self.trains.append(
                TrainRun(
                    train_id=train_id,
                    direction=direction,
                    segments=by_direction[direction],
                    depart_tick=self._ticks(departure),
                )
            )
        self._groups = [
            [t for t in self.trains if t.direction is direction] for direction in (Direction.up, Direction.down)
        ]
        self._started = False

    @property
    def now(self) -> float:
        return self.tick * self.dt

    @property
    def finished(self) -> bool:
        return all(t.phase is Phase.finished for t in self.trains)

    def _ticks(self, seconds: float) -> int:
        return int(round(seconds / self.dt))

    def start(self) -> list[DecisionRequest]:
        if self._started:
            raise RuntimeError("simulation already started")
        self._started = True
        if not self.trains:
            return []
        self._process_events()
        return list(self.pending)

    def train_states(self) -> list[TrainState]:
        return [t.state_at(self.tick, self.dt) for t in self.trains]

    def dispatch(self, train_id: int, cruise_speed: float, next_dwell: float) -> None:
        """Start the pending departure of train_id on its next segment.

        cruise_speed is in m/s; next_dwell (s) applies at the arrival station and is
        ignored on the terminal segment.
        """
        request = next((r for r in self.pending if r.train_id == train_id), None)
        if request is None:
            raise ValueError(f"train {train_id} has no pending departure")
        run = self.trains[train_id]
        segment = run.current_segment
        assert segment is not None
        profile = traverse_segment(segment.distance_m, float(cruise_speed), self.physics, self.dt)
        run.profile = profile
        run.phase = Phase.accelerating
        run.awaiting_command = False
        run.depart_tick = self.tick
        run.arrive_tick = self.tick + profile.n_ticks
        run.next_dwell = 0.0 if request.terminal_segment else float(next_dwell)
        run.departures.append(self.now)
        run.commands.append((float(cruise_speed), run.next_dwell))
        self.pending.remove(request)

    def advance(self) -> list[DecisionRequest]:
        """Step every train by one tick; returns the departures falling due at the new time."""
        if self.pending:
            raise PendingDecisionError(f"{len(self.pending)} departures await a command")
        if self.finished:
            return []
        self._advance_to(self.tick + 1)
        return list(self.pending)

    def run_until_decision(self) -> list[DecisionRequest]:
        """Advance until a departure needs a command or every train has finished."""
        while not self.pending and not self.finished:
            self._advance_to(self._next_event_tick())
        return list(self.pending)

    def total_time(self) -> float:
        if not self.finished:
            raise SimulationNotFinishedError(
                f"{sum(t.phase is not Phase.finished for t in self.trains)} trains still running at t={self.now:.1f} s"
            )
        return max((t.finish_tick for t in self.trains), default=0) * self.dt

    def _next_event_tick(self) -> int:
        ticks = []
        for run in self.trains:
            if run.phase.moving:
                ticks.append(run.arrive_tick)
            elif run.phase is Phase.dwelling and not run.awaiting_command:
                ticks.append(run.depart_tick)
        return min(ticks)

    def _advance_to(self, stop: int) -> None:
        start = self.tick
        n = stop - start
        traction = np.zeros(n, dtype=np.float64)
        braking = np.zeros(n, dtype=np.float64)
        for run in self.trains:
            if run.phase.moving and run.profile is not None:
                lo = run.offset(start)
                traction += run.profile.traction_power[lo:lo + n]
                braking += run.profile.braking_power[lo:lo + n]
        regen = self.ledger.accumulate(traction, braking, self.physics.beta3)
        if self._trace is not None:
            self._trace.append((start, traction, braking, regen))
        self._check_order(start, stop)
        self.tick = stop
        self._process_events()

    def _check_order(self, start: int, stop: int) -> None:
        for group in self._groups:
            for leader, follower in zip(group, group[1:]):
                if not (leader.phase.moving or follower.phase.moving):
                    continue
                pair = (leader.train_id, follower.train_id)
                behind = leader.travelled_over(start, stop) < follower.travelled_over(start, stop)
                if not np.any(behind):
                    self._inverted.discard(pair)
                    continue
                if pair in self._inverted:
                    continue
                self._inverted.add(pair)
                self.order_violations += 1
                at = (start + int(np.argmax(behind))) * self.dt
                if self.strict_order:
                    raise OrderViolationError(leader.train_id, follower.train_id, at)
                logger.warning("train %d overtook train %d at t=%.1f s", follower.train_id, leader.train_id, at)

    def _process_events(self) -> None:
        for run in self.trains:
            if run.phase.moving and run.arrive_tick == self.tick:
                self._arrive(run)
        for run in self.trains:
            if run.phase is Phase.dwelling and not run.awaiting_command and run.depart_tick == self.tick:
                run.awaiting_command = True
                self.pending.append(
                    DecisionRequest(
                        train_id=run.train_id,
                        segment_index=run.segment_index,
                        time=self.now,
                        terminal_segment=run.segment_index == len(run.segments) - 1,
                    )
                )

    def _arrive(self, run: TrainRun) -> None:
        segment = run.current_segment
        assert segment is not None and run.profile is not None
        run.stamps = run.stamps_at(run.arrive_tick - 1, self.dt)
        run.stamps = PhaseTimestamps(
            accelerating=run.stamps.accelerating,
            cruising=run.stamps.cruising,
            braking=run.stamps.braking,
            dwelling=self.now,
        )
        run.completed_distance += segment.distance_m
        run.arrivals.append(self.now)
        run.profile = None
        run.segment_index += 1
        if run.segment_index == len(run.segments):
            run.phase = Phase.finished
            run.finish_tick = self.tick
            return
        extra = sample_disturbance(self.disturbance, self.rng)
        run.disturbances.append(extra)
        if extra > 0:
            logger.debug("train %d delayed %.1f s at %s", run.train_id, extra, segment.to_station)
        run.phase = Phase.dwelling
        run.depart_tick = self.tick + self._ticks(run.next_dwell + extra)

    def write_trace(self, path: str | os.PathLike[str]) -> None:
        if self._trace is None:
            raise RuntimeError("simulation was created without trace=True")
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(TRACE_HEADER)
            for start, traction, braking, regen in self._trace:
                for k in range(len(traction)):
                    writer.writerow([
                        f"{(start + k) * self.dt:.3f}",
                        f"{traction[k]:.6f}",
                        f"{braking[k]:.6f}",
                        f"{regen[k]:.6f}",
                        int(traction[k] > 0 and braking[k] > 0),
                    ])
