"""Single-train physics: force laws, phase planning, and explicit-Euler motion.

Internal units are SI (m, m/s, kg) with forces in kN and powers in kW. The
line file's km, km/h never reach this module.
"""

import dataclasses
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from src.config import BrakingParams, ResistanceParams, TractionParams, TrainPhysics

logger = logging.getLogger(__name__)

# sub-step bookkeeping tolerance, s
_EPS_T = 1e-12
# lowest peak speed tried before a segment is declared infeasible, m/s
MIN_PEAK_SPEED = 0.5
MAX_SEGMENT_TICKS = 2_000_000


class InfeasibleSegmentError(ValueError):
    def __init__(self, distance: float | None, reason: str):
        subject = f"segment of {distance:.1f} m" if distance is not None else "segment"
        super().__init__(f"{subject} is infeasible: {reason}")
        self.distance = distance
        self.reason = reason


class Phase(str, Enum):
    dwelling = "dwelling"
    accelerating = "accelerating"
    cruising = "cruising"
    braking = "braking"
    finished = "finished"

    @property
    def moving(self) -> bool:
        return self in (Phase.accelerating, Phase.cruising, Phase.braking)


class Direction(str, Enum):
    up = "up"
    down = "down"

    @property
    def sign(self) -> float:
        return 1.0 if self is Direction.up else -1.0


def traction_force(v: float, tp: TractionParams) -> float:
    if v < tp.v1:
        return tp.p1
    return tp.q1 / (v + tp.p2)


def braking_force(v: float, bp: BrakingParams) -> float:
    """Magnitude of the maximum braking force; the integrator applies the sign."""
    if v < bp.v2:
        return bp.p3
    return bp.q2 / (v + bp.p4)


def resistance_force(v: float, rp: ResistanceParams) -> float:
    return rp.lambda1 * v * v + rp.lambda2 * v + rp.lambda3


def _acceleration(phase: Phase, v: float, phys: TrainPhysics) -> float:
    """Net acceleration in m/s^2 under full traction or full braking."""
    resist = resistance_force(v, phys.resistance) + phys.gravity_component
    if phase is Phase.accelerating:
        force = traction_force(v, phys.traction) - resist
    elif phase is Phase.braking:
        force = -(braking_force(v, phys.braking) + resist)
    else:
        return 0.0
    return force * 1000.0 / phys.mass


def _traction_power_at(phase: Phase, v: float, phys: TrainPhysics) -> float:
    if phase is Phase.accelerating:
        return traction_force(v, phys.traction) * v / phys.beta1
    if phase is Phase.cruising:
        # holding speed costs the resistance-balancing force
        balance = resistance_force(v, phys.resistance) + phys.gravity_component
        return max(balance, 0.0) * v / phys.beta1
    return 0.0


def _braking_power_at(phase: Phase, v: float, phys: TrainPhysics) -> float:
    if phase is Phase.braking:
        return braking_force(v, phys.braking) * v * phys.beta2
    return 0.0


@dataclass(frozen=True, slots=True)
class PhasePlan:
    accel_distance: float
    cruise_distance: float
    brake_distance: float
    commanded_cruise_speed: float
    requested_cruise_speed: float

    @property
    def distance(self) -> float:
        return self.accel_distance + self.cruise_distance + self.brake_distance

    @property
    def brake_onset(self) -> float:
        return self.accel_distance + self.cruise_distance

    @property
    def triangular(self) -> bool:
        return self.commanded_cruise_speed < self.requested_cruise_speed


@dataclass(frozen=True, slots=True)
class PhaseTimestamps:
    """Latest time each phase began (s on the caller's clock); -1 until it first happens."""

    accelerating: float = -1.0
    cruising: float = -1.0
    braking: float = -1.0
    dwelling: float = -1.0


@dataclass(frozen=True, slots=True)
class TrainState:
    train_id: int = 0
    direction: Direction = Direction.up
    segment_index: int = 0
    position_in_segment: float = 0.0
    speed: float = 0.0
    phase: Phase = Phase.dwelling
    dwell_remaining: float = 0.0
    commanded_cruise_speed: float = 0.0
    commanded_next_dwell: float = 0.0
    phase_timestamps: PhaseTimestamps = PhaseTimestamps()
    # kW*s since departure, split by phase
    energy_accel: float = 0.0
    energy_cruise: float = 0.0
    energy_brake: float = 0.0
    # mean power over the last step, kW
    step_traction_power: float = 0.0
    step_braking_power: float = 0.0


def traction_power(ts: TrainState, phys: TrainPhysics) -> float:
    return _traction_power_at(ts.phase, ts.speed, phys)


def braking_power(ts: TrainState, phys: TrainPhysics) -> float:
    return _braking_power_at(ts.phase, ts.speed, phys)


def _run_phase(phase: Phase, v_start: float, v_end: float, phys: TrainPhysics, dt: float) -> float:
    """Distance covered by the Euler scheme driving speed from v_start to v_end at full effort."""
    v, x = v_start, 0.0
    for _ in range(MAX_SEGMENT_TICKS):
        a = _acceleration(phase, v, phys)
        if phase is Phase.accelerating and a <= 0:
            raise InfeasibleSegmentError(None, f"traction cannot exceed resistance at {v:.2f} m/s")
        v_next = v + a * dt
        if (phase is Phase.accelerating and v_next >= v_end) or (phase is Phase.braking and v_next <= v_end):
            return x + v * (v_end - v) / a
        x += v * dt
        v = v_next
    raise RuntimeError("phase integration did not converge")


@lru_cache(maxsize=8192)
def _phase_distances(cruise_speed: float, phys: TrainPhysics, dt: float) -> tuple[float, float]:
    return (
        _run_phase(Phase.accelerating, 0.0, cruise_speed, phys, dt),
        _run_phase(Phase.braking, cruise_speed, 0.0, phys, dt),
    )


@lru_cache(maxsize=8192)
def plan_profile(distance: float, cruise_speed: float, phys: TrainPhysics, dt: float) -> PhasePlan:
    """Accelerate-cruise-brake split of one segment.

    When the trapezoid does not fit, the peak speed is lowered by bisection to
    the largest one whose accelerate and brake runs still fit.
    """
    if distance <= 0:
        raise ValueError(f"distance must be > 0, got {distance}")
    if not 0 < cruise_speed <= phys.speed_limit * (1 + 1e-9):
        raise ValueError(f"cruise speed {cruise_speed} m/s outside (0, {phys.speed_limit}]")
    cruise_speed = min(cruise_speed, phys.speed_limit)

    accel, brake = _phase_distances(cruise_speed, phys, dt)
    if accel + brake <= distance:
        return PhasePlan(accel, distance - accel - brake, brake, cruise_speed, cruise_speed)

    lo_accel, lo_brake = _phase_distances(MIN_PEAK_SPEED, phys, dt)
    if lo_accel + lo_brake > distance:
        raise InfeasibleSegmentError(distance, f"even a {MIN_PEAK_SPEED} m/s peak overshoots")
    lo, hi = MIN_PEAK_SPEED, cruise_speed
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        a_mid, b_mid = _phase_distances(mid, phys, dt)
        if a_mid + b_mid <= distance:
            lo, lo_accel, lo_brake = mid, a_mid, b_mid
        else:
            hi = mid
    logger.debug("segment %.0f m: peak lowered from %.2f to %.2f m/s", distance, cruise_speed, lo)
    return PhasePlan(lo_accel, distance - lo_accel - lo_brake, lo_brake, lo, cruise_speed)


def step_train(ts: TrainState, phys: TrainPhysics, plan: PhasePlan, dt: float, *, now: float = 0.0) -> TrainState:
    """Advance one moving train by dt with explicit Euler (x' = x + v*dt, v' = v + a*dt).

    Phase events (speed reaching the cruise command, position reaching brake
    onset, standstill or the platform) are located inside the step and the step
    is split there, so the recorded step-mean powers integrate energy to second
    order. Arrival switches to dwelling with the commanded next dwell. States that
    are not moving come back unchanged.
    """
    if not ts.phase.moving:
        return ts
    phase, v, x = ts.phase, ts.speed, ts.position_in_segment
    vc = plan.commanded_cruise_speed
    onset, end = plan.brake_onset, plan.distance
    stamps = ts.phase_timestamps
    e_acc, e_cru, e_brk = ts.energy_accel, ts.energy_cruise, ts.energy_brake
    dwell_remaining = ts.dwell_remaining

    elapsed = 0.0
    while dt - elapsed > _EPS_T:
        remaining = dt - elapsed
        if phase is Phase.accelerating:
            if x >= onset:
                phase = Phase.braking
                stamps = dataclasses.replace(stamps, braking=now + elapsed)
                continue
            a = _acceleration(phase, v, phys)
            tau, event = remaining, None
            if a > 0 and v + a * remaining >= vc:
                tau, event = (vc - v) / a, Phase.cruising
            if v > 0 and x + v * tau >= onset:
                tau, event = (onset - x) / v, Phase.braking
            v_next = vc if event is Phase.cruising else min(v + a * tau, vc)
            e_acc += 0.5 * (_traction_power_at(phase, v, phys) + _traction_power_at(phase, v_next, phys)) * tau
            x += v * tau
            v = min(max(v_next, 0.0), phys.speed_limit)
        elif phase is Phase.cruising:
            tau, event = remaining, None
            if v <= 0:
                tau, event = 0.0, Phase.braking
            elif x + v * tau >= onset:
                tau, event = max((onset - x) / v, 0.0), Phase.braking
            e_cru += _traction_power_at(phase, v, phys) * tau
            x += v * tau
        else:
            a = _acceleration(phase, v, phys)
            tau, event = remaining, None
            if v + a * remaining <= 0:
                tau, event = v / -a, Phase.dwelling
            if v > 0 and x + v * tau >= end:
                tau, event = (end - x) / v, Phase.dwelling
            v_next = max(v + a * tau, 0.0)
            e_brk += 0.5 * (_braking_power_at(phase, v, phys) + _braking_power_at(phase, v_next, phys)) * tau
            x += v * tau
            v = v_next

        elapsed += max(tau, 0.0)
        if event is not None:
            phase = event
            t_event = now + elapsed
            if event is Phase.cruising:
                stamps = dataclasses.replace(stamps, cruising=t_event)
            elif event is Phase.braking:
                stamps = dataclasses.replace(stamps, braking=t_event)
            else:
                stamps = dataclasses.replace(stamps, dwelling=t_event)
                x, v = end, 0.0
                dwell_remaining = ts.commanded_next_dwell
                break

    return dataclasses.replace(
        ts,
        phase=phase,
        speed=v,
        position_in_segment=min(max(x, 0.0), end),
        phase_timestamps=stamps,
        dwell_remaining=dwell_remaining,
        energy_accel=e_acc,
        energy_cruise=e_cru,
        energy_brake=e_brk,
        step_traction_power=(e_acc - ts.energy_accel + e_cru - ts.energy_cruise) / dt,
        step_braking_power=(e_brk - ts.energy_brake) / dt,
    )


@dataclass(frozen=True)
class SegmentProfile:
    """A full departure-to-arrival run sampled on the integration grid.

    Arrays hold one entry per tick: tick k covers [k*dt, (k+1)*dt) after
    departure. The train is at the platform once n_ticks have elapsed.
    """

    plan: PhasePlan
    dt: float
    traction_power: np.ndarray
    braking_power: np.ndarray
    position: np.ndarray
    speed: np.ndarray
    cruise_start: float
    brake_start: float
    arrival: float
    energy_accel: float
    energy_cruise: float
    energy_brake: float

    @property
    def n_ticks(self) -> int:
        return len(self.traction_power)

    @property
    def traversal_time(self) -> float:
        return self.n_ticks * self.dt

    @property
    def traction_energy(self) -> float:
        return self.energy_accel + self.energy_cruise


@lru_cache(maxsize=4096)
def traverse_segment(distance: float, cruise_speed: float, phys: TrainPhysics, dt: float) -> SegmentProfile:
    plan = plan_profile(distance, cruise_speed, phys, dt)
    state = TrainState(phase=Phase.accelerating, commanded_cruise_speed=plan.commanded_cruise_speed,
                       phase_timestamps=PhaseTimestamps(accelerating=0.0))
    traction: list[float] = []
    braking: list[float] = []
    position: list[float] = []
    speed: list[float] = []
    for k in range(MAX_SEGMENT_TICKS):
        if state.phase is Phase.dwelling:
            break
        position.append(state.position_in_segment)
        speed.append(state.speed)
        state = step_train(state, phys, plan, dt, now=k * dt)
        traction.append(state.step_traction_power)
        braking.append(state.step_braking_power)
    else:
        raise RuntimeError(f"segment of {distance:.1f} m did not finish within {MAX_SEGMENT_TICKS} ticks")

    stamps = state.phase_timestamps
    profile = SegmentProfile(
        plan=plan,
        dt=dt,
        traction_power=np.asarray(traction, dtype=np.float64),
        braking_power=np.asarray(braking, dtype=np.float64),
        position=np.asarray(position, dtype=np.float64),
        speed=np.asarray(speed, dtype=np.float64),
        cruise_start=stamps.cruising,
        brake_start=stamps.braking,
        arrival=stamps.dwelling,
        energy_accel=state.energy_accel,
        energy_cruise=state.energy_cruise,
        energy_brake=state.energy_brake,
    )
    for arr in (profile.traction_power, profile.braking_power, profile.position, profile.speed):
        arr.setflags(write=False)
    return profile
