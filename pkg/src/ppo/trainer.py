"""Rollout collection, PPO updates and the training log."""

import csv
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.config import PpoConfig
from src.interfaces.reports import EpisodeSummary
from src.mdp_env import MetroTimetableEnv
from src.ppo.buffer import RolloutBuffer
from src.ppo.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from src.ppo.losses import Batch, total_loss
from src.ppo.networks import Params, init_params, sample_action, value_forward
from src.ppo.optim import AdamState, adam_step, init_adam

logger = logging.getLogger(__name__)

LOG_HEADER = ("iter", "mean_ep_reward", "pg_loss", "value_loss", "entropy_loss", "steps_per_sec")
LOG_FILE = "train_log.csv"
CHECKPOINT_FILE = "checkpoint.npz"


class NonFiniteLossError(RuntimeError):
    def __init__(self, iteration: int, dump_path: Path):
        super().__init__(f"non-finite loss at iteration {iteration}; offending batch written to {dump_path}")
        self.iteration = iteration
        self.dump_path = dump_path


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    mean_ep_reward: float
    pg_loss: float
    value_loss: float
    entropy_loss: float
    steps_per_sec: float

    def row(self) -> list[str]:
        return [
            str(self.iteration),
            repr(self.mean_ep_reward),
            repr(self.pg_loss),
            repr(self.value_loss),
            repr(self.entropy_loss),
            f"{self.steps_per_sec:.1f}",
        ]


def _dump_batch(path: Path, batch: Batch) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        np.savez(
            f,
            obs=batch.obs,
            actions=batch.actions,
            old_log_probs=batch.old_log_probs,
            advantages=batch.advantages,
            value_targets=batch.value_targets,
        )
    return path


class PpoTrainer:
    """Collects `n_steps` decisions per iteration and runs `epochs_per_update` passes of minibatch Adam.

    The rollout buffer spans episode boundaries: a finished episode is reset
    in place with the next episode seed drawn from the trainer rng, and its
    done flag stops bootstrapping across the boundary.
    """

    def __init__(self, env: MetroTimetableEnv, cfg: PpoConfig, *, out_dir: str | os.PathLike[str], config_hash: str):
        self.env = env
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        self.config_hash = config_hash
        self.rng = np.random.default_rng(cfg.seed)
        self.obs_dim = int(env.observation_space.shape[0])
        if self.obs_dim == 0:
            raise ValueError("cannot train a policy for a fleet without trains")
        self.params: Params = init_params(
            self.obs_dim, 2, tuple(cfg.hidden_sizes), self.rng, log_std_init=cfg.log_std_init
        )
        self.adam: AdamState = init_adam(self.params)
        self.iteration = 0
        self.buffer = RolloutBuffer(cfg.n_steps, self.obs_dim)
        self._obs: np.ndarray | None = None
        self._episode_reward = 0.0

    @property
    def log_path(self) -> Path:
        return self.out_dir / LOG_FILE

    @property
    def checkpoint_path(self) -> Path:
        return self.out_dir / CHECKPOINT_FILE

    def _next_episode_seed(self) -> int:
        return int(self.rng.integers(0, 2**63 - 1))

    def _reset_env(self) -> np.ndarray:
        obs, _ = self.env.reset(seed=self._next_episode_seed())
        self._episode_reward = 0.0
        return obs

    def collect(self) -> tuple[list[float], float]:
        """Fill the buffer; returns the rewards of episodes completed meanwhile and the last bootstrap value."""
        self.buffer.clear()
        finished: list[float] = []
        if self._obs is None:
            self._obs = self._reset_env()
        obs = self._obs
        while not self.buffer.full:
            sample = sample_action(self.params, obs, self.rng)
            next_obs, reward, terminated, truncated, _ = self.env.step(sample.action)
            done = terminated or truncated
            self.buffer.add(obs, sample.raw, sample.log_prob, reward, sample.value, done)
            self._episode_reward += reward
            if done:
                finished.append(self._episode_reward)
                next_obs = self._reset_env()
            obs = next_obs
        self._obs = obs
        return finished, float(value_forward(self.params, obs))

    def update(self, batch: Batch) -> tuple[float, float, float]:
        """Minibatch Adam over `epochs_per_update` shuffled passes; returns mean (pg, value, entropy) losses."""
        cfg = self.cfg
        losses = []
        for _ in range(cfg.epochs_per_update):
            order = self.rng.permutation(len(batch))
            for start in range(0, len(batch), cfg.batch_size):
                minibatch = batch.subset(order[start:start + cfg.batch_size])
                breakdown, grads = total_loss(self.params, minibatch, cfg)
                if not np.isfinite(breakdown.total):
                    dump = _dump_batch(self.out_dir / f"nonfinite_iter{self.iteration + 1}.npz", minibatch)
                    logger.error("non-finite loss at iteration %d, batch dumped to %s", self.iteration + 1, dump)
                    raise NonFiniteLossError(self.iteration + 1, dump)
                self.params, self.adam = adam_step(self.params, grads, self.adam, cfg.learning_rate)
                losses.append((breakdown.surrogate, breakdown.value, breakdown.entropy))
        pg, vf, ent = np.mean(np.asarray(losses), axis=0)
        return float(pg), float(vf), float(ent)

    def run_iteration(self) -> IterationStats:
        started = time.perf_counter()
        episode_rewards, last_value = self.collect()
        elapsed = time.perf_counter() - started
        batch = self.buffer.to_batch(last_value, self.cfg.gamma)
        pg, vf, ent = self.update(batch)
        self.iteration += 1
        return IterationStats(
            iteration=self.iteration,
            mean_ep_reward=float(np.mean(episode_rewards)) if episode_rewards else float("nan"),
            pg_loss=pg,
            value_loss=vf,
            entropy_loss=ent,
            steps_per_sec=self.cfg.n_steps / elapsed if elapsed > 0 else 0.0,
        )

    def to_checkpoint(self) -> Checkpoint:
        return Checkpoint(
            params=self.params,
            adam=self.adam,
            iteration=self.iteration,
            config_hash=self.config_hash,
            ppo_config=self.cfg,
            rng_state=self.rng.bit_generator.state,
        )

    def restore(self, ckpt: Checkpoint) -> None:
        """Continue from a checkpoint. The interrupted episode is not restored; collection starts a new one."""
        self.params = ckpt.params
        self.adam = ckpt.adam
        self.iteration = ckpt.iteration
        self.rng.bit_generator.state = ckpt.rng_state
        self._obs = None

    def save(self) -> Path:
        return save_checkpoint(self.checkpoint_path, self.to_checkpoint())

    def train(self, iterations: int | None = None) -> Path:
        """Run until `iterations` (default: cfg.total_iterations) have been completed in total."""
        target = iterations if iterations is not None else self.cfg.total_iterations
        self.out_dir.mkdir(parents=True, exist_ok=True)
        fresh = self.iteration == 0 or not self.log_path.exists()
        with open(self.log_path, "w" if fresh else "a", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            if fresh:
                writer.writerow(LOG_HEADER)
            while self.iteration < target:
                stats = self.run_iteration()
                writer.writerow(stats.row())
                f.flush()
                logger.info(
                    "iter %d: mean_ep_reward=%.4f pg_loss=%.4f value_loss=%.4f entropy_loss=%.4f (%.0f steps/s)",
                    stats.iteration, stats.mean_ep_reward, stats.pg_loss, stats.value_loss,
                    stats.entropy_loss, stats.steps_per_sec,
                )
                if stats.iteration % self.cfg.checkpoint_every == 0:
                    self.save()
        return self.save()


def train(
    cfg: PpoConfig,
    env: MetroTimetableEnv,
    *,
    out_dir: str | os.PathLike[str],
    config_hash: str,
    resume: str | os.PathLike[str] | None = None,
    iterations: int | None = None,
) -> Path:
    trainer = PpoTrainer(env, cfg, out_dir=out_dir, config_hash=config_hash)
    if resume is not None:
        ckpt = load_checkpoint(resume, expected_config_hash=config_hash, obs_dim=trainer.obs_dim)
        trainer.restore(ckpt)
        logger.info("resuming from %s at iteration %d", resume, ckpt.iteration)
    return trainer.train(iterations)


def run_policy_episode(
    params: Params,
    env: MetroTimetableEnv,
    seed: int,
    *,
    deterministic: bool = True,
) -> EpisodeSummary:
    """Play one episode with the policy; stochastic runs draw action noise from a generator seeded like the episode."""
    rng = None if deterministic else np.random.default_rng(seed)
    obs, _ = env.reset(seed=seed)
    done = env.done
    while not done:
        sample = sample_action(params, obs, rng, deterministic=deterministic)
        obs, _, terminated, truncated, _ = env.step(sample.action)
        done = terminated or truncated
    return env.summary()


def evaluate(
    params: Params,
    env: MetroTimetableEnv,
    seeds: list[int],
    *,
    deterministic: bool = True,
) -> list[EpisodeSummary]:
    return [run_policy_episode(params, env, seed, deterministic=deterministic) for seed in seeds]
