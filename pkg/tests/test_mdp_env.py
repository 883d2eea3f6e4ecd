import numpy as np
import pytest

from src.config import ActionBounds
from src.mdp_env import (
    FEATURES_PER_TRAIN,
    EpisodeFinishedError,
    MetroTimetableEnv,
    map_action,
    quantize_cruise,
)
from tests.conftest import make_env_config

BOUNDS = ActionBounds()


@pytest.mark.parametrize(
    "raw, cruise_kmh, dwell",
    [
        ((-1.0, -1.0), 40.0, 15.0),
        ((1.0, 1.0), 80.0, 60.0),
        ((0.0, 0.0), 60.0, 37.5),
        ((-5.0, 5.0), 40.0, 60.0),
    ],
)
def test_map_action(raw, cruise_kmh, dwell):
    cruise, mapped_dwell = map_action(raw, BOUNDS)
    assert cruise * 3.6 == pytest.approx(cruise_kmh)
    assert mapped_dwell == pytest.approx(dwell)


def test_map_action_is_monotone():
    raws = np.linspace(-1, 1, 41)
    cruises = [map_action((r, 0.0), BOUNDS)[0] for r in raws]
    dwells = [map_action((0.0, r), BOUNDS)[1] for r in raws]
    assert np.all(np.diff(cruises) > 0)
    assert np.all(np.diff(dwells) > 0)


def test_quantize_cruise_stays_in_bounds():
    assert quantize_cruise(60.2 / 3.6, BOUNDS, 0.5) * 3.6 == pytest.approx(60.0)
    assert quantize_cruise(79.9 / 3.6, BOUNDS, 0.5) * 3.6 == pytest.approx(80.0)
    assert quantize_cruise(61.234 / 3.6, BOUNDS, 0.0) * 3.6 == pytest.approx(61.234)


def test_reset_observation(toy_line, physics):
    env = MetroTimetableEnv(toy_line, physics, make_env_config(1, 1))
    obs, info = env.reset(seed=3)
    assert obs.shape == (2 * FEATURES_PER_TRAIN,)
    assert env.observation_space.contains(obs)
    assert info["deciding_train"] == 0
    assert info["time"] == 0.0
    rows = obs.reshape(2, FEATURES_PER_TRAIN)
    # nothing has happened yet: every time point is at its sentinel
    assert np.all(rows[:, :4] == -1.0)
    # up train at the origin, down train at the far end of the up axis
    assert rows[0, 4] == 0.0
    assert rows[1, 4] == pytest.approx(1.0)
    assert rows[0, 5] == pytest.approx(1000.0 / 2200.0)
    assert rows[1, 5] == pytest.approx(1200.0 / 2200.0)
    assert list(rows[:, 6]) == [1.0, -1.0]
    assert list(rows[:, 7]) == [0.0, 0.0]


def test_same_departure_time_decides_in_id_order(toy_line, physics):
    env = MetroTimetableEnv(toy_line, physics, make_env_config(1, 1))
    env.reset(seed=0)
    obs, reward, terminated, truncated, info = env.step(np.zeros(2))
    # train 1 leaves at t=0 as well, so no time passes
    assert info["deciding_train"] == 1
    assert info["time"] == 0.0
    assert reward == 0.0
    assert not terminated and not truncated


def test_episode_length_and_telescoping_reward(toy_line, physics):
    env = MetroTimetableEnv(toy_line, physics, make_env_config(2, 2, probability=0.3))
    env.reset(seed=11)
    rng = np.random.default_rng(0)
    rewards = []
    terminated = False
    while not terminated:
        obs, reward, terminated, truncated, info = env.step(rng.uniform(-1, 1, size=2))
        assert env.observation_space.contains(obs)
        rewards.append(reward)
    assert len(rewards) == 4 * len(toy_line.segments)
    ledger = info["ledger"]
    assert sum(rewards) * env.env_config.reward_scale == pytest.approx(ledger.overlap_seconds, abs=1e-9)
    rows = obs.reshape(4, FEATURES_PER_TRAIN)
    assert np.all(rows[:, 7] == 1.0)
    assert np.all(rows[:, 5] == 0.0)
    assert info["total_time"] > 0
    with pytest.raises(EpisodeFinishedError):
        env.step(np.zeros(2))


def test_fixed_seed_and_actions_are_reproducible(toy_line, physics):
    def rollout(seed: int) -> list[float]:
        env = MetroTimetableEnv(toy_line, physics, make_env_config(2, 2, probability=0.5))
        env.reset(seed=seed)
        actions = np.random.default_rng(123)
        out = []
        done = False
        while not done:
            _, reward, done, _, _ = env.step(actions.uniform(-1, 1, size=2))
            out.append(reward)
        return out

    assert rollout(7) == rollout(7)


def test_different_seeds_change_disturbances(toy_line, physics):
    env = MetroTimetableEnv(toy_line, physics, make_env_config(2, 2, probability=1.0))
    env.run_baseline(seed=1)
    first = [t.disturbances for t in env.sim.trains]
    env.run_baseline(seed=2)
    second = [t.disturbances for t in env.sim.trains]
    assert first != second


def test_baseline_uses_nominal_commands(toy_line, physics):
    env = MetroTimetableEnv(toy_line, physics, make_env_config(1, 0))
    ledger = env.run_baseline(seed=0)
    decisions = env.summary().decisions
    assert [d.cruise_cmd_kmh for d in decisions] == pytest.approx([72.0, 72.0])
    # dwell only matters for the intermediate station
    assert [d.dwell_cmd for d in decisions] == [30.0, 0.0]
    assert ledger.E_total == pytest.approx(ledger.E_T - ledger.E_R)


def test_baseline_without_disturbance_is_seed_independent(toy_line, physics):
    env = MetroTimetableEnv(toy_line, physics, make_env_config(2, 2))
    assert env.run_baseline(seed=1) == env.run_baseline(seed=99)


def test_summary_has_decision_log(toy_line, physics):
    env = MetroTimetableEnv(toy_line, physics, make_env_config(1, 1))
    env.run_baseline(seed=4)
    summary = env.summary()
    assert summary.seed == 4
    assert len(summary.decisions) == 4
    assert sum(d.reward for d in summary.decisions) * 100.0 == pytest.approx(summary.ledger.overlap_seconds)


def test_empty_fleet_episode_is_over_at_reset(toy_line, physics):
    env = MetroTimetableEnv(toy_line, physics, make_env_config(0, 0))
    obs, info = env.reset(seed=0)
    assert obs.shape == (0,)
    assert info["deciding_train"] == -1
    assert env.done
    with pytest.raises(EpisodeFinishedError):
        env.step(np.zeros(2))


def test_shipped_episode_has_460_decisions(xiamen_line, physics):
    env = MetroTimetableEnv(xiamen_line, physics, make_env_config(10, 10, probability=0.3))
    env.run_baseline(seed=0)
    assert len(env.summary().decisions) == 460


def test_observation_matrix_three_trains(toy_line, physics):
    env = MetroTimetableEnv(toy_line, physics, make_env_config(2, 1))
    env.reset(seed=0)
    # train 0 (up) leaves at t=0; train 2, first of the down group, is due at t=0 as well
    obs, _, _, _, info = env.step(np.zeros(2))
    assert info["deciding_train"] == 2
    departed = -1.0 + 2.0 * 0.1 / (7200.0 + 0.1)
    expected = np.array(
        [
            [departed, -1.0, -1.0, -1.0, 0.0, 1000.0 / 2200.0, 1.0, 0.0],
            [-1.0, -1.0, -1.0, -1.0, 0.0, 1000.0 / 2200.0, 1.0, 0.0],
            [-1.0, -1.0, -1.0, -1.0, 1.0, 1200.0 / 2200.0, -1.0, 0.0],
        ]
    )
    np.testing.assert_allclose(obs.reshape(3, FEATURES_PER_TRAIN), expected, atol=1e-4)

    done = False
    while not done:
        obs, _, done, _, _ = env.step(np.zeros(2))
    rows = obs.reshape(3, FEATURES_PER_TRAIN)
    np.testing.assert_allclose(rows[:, 4], [1.0, 1.0, 0.0], atol=1e-9)
    assert np.all(rows[:, 5] == 0.0)
    assert np.all(rows[:, 7] == 1.0)
    assert np.all(rows[:, [0, 2]] > -1.0)


def test_event_at_time_zero_differs_from_sentinel(toy_line, physics):
    env = MetroTimetableEnv(toy_line, physics, make_env_config(2, 0))
    env.reset(seed=0)
    obs, *_ = env.step(np.zeros(2))
    rows = obs.reshape(2, FEATURES_PER_TRAIN)
    # train 0 departed at t=0, train 1 waits for its headway
    assert rows[0, 0] > -1.0
    assert rows[1, 0] == -1.0


def test_reset_without_seed_uses_config_seed(toy_line, physics):
    cfg = make_env_config(2, 2, probability=1.0, seed=5)
    unseeded = MetroTimetableEnv(toy_line, physics, cfg)
    unseeded.run_baseline()
    seeded = MetroTimetableEnv(toy_line, physics, cfg)
    seeded.run_baseline(seed=5)
    assert unseeded.summary().seed == 5
    assert [t.disturbances for t in unseeded.sim.trains] == [t.disturbances for t in seeded.sim.trains]
