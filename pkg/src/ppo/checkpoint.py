"""Checkpoint files: one `.npz` holding parameters, Adam moments and a JSON metadata entry.

The metadata records the format version, iteration, config hash, PPO settings,
the trainer rng state and a SHA-256 digest over every stored array.
"""

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from src.config import PpoConfig
from src.cryptography import sha256_hex, verify_digest
from src.ppo.networks import Params, input_dim
from src.ppo.optim import AdamState

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
_META_KEY = "__meta__"
_SECTIONS = ("param", "adam_m", "adam_v")


class CheckpointIncompatibleError(ValueError):
    pass


class CheckpointIntegrityError(ValueError):
    pass


@dataclass
class Checkpoint:
    params: Params
    adam: AdamState
    iteration: int
    config_hash: str
    ppo_config: PpoConfig
    rng_state: dict[str, Any]

    @property
    def obs_dim(self) -> int:
        return input_dim(self.params)


def _array_chunks(arrays: dict[str, np.ndarray]):
    for key in sorted(arrays):
        arr = np.ascontiguousarray(arrays[key], dtype=np.float64)
        yield key.encode()
        yield str(arr.shape).encode()
        yield arr.tobytes()


def save_checkpoint(path: str | os.PathLike[str], ckpt: Checkpoint) -> Path:
    path = Path(path)
    arrays: dict[str, np.ndarray] = {}
    for section, source in zip(_SECTIONS, (ckpt.params, ckpt.adam.m, ckpt.adam.v)):
        for name, arr in source.items():
            arrays[f"{section}.{name}"] = arr
    meta = {
        "format_version": FORMAT_VERSION,
        "iteration": ckpt.iteration,
        "config_hash": ckpt.config_hash,
        "ppo_config": ckpt.ppo_config.model_dump(mode="json"),
        "rng_state": ckpt.rng_state,
        "adam_step": ckpt.adam.step,
        "obs_dim": ckpt.obs_dim,
        "digest": sha256_hex(_array_chunks(arrays)),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        np.savez(f, **arrays, **{_META_KEY: np.array(json.dumps(meta, sort_keys=True))})
    os.replace(tmp, path)
    logger.info("checkpoint written: %s (iteration %d)", path, ckpt.iteration)
    return path


def load_checkpoint(
    path: str | os.PathLike[str],
    *,
    expected_config_hash: str | None = None,
    obs_dim: int | None = None,
) -> Checkpoint:
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data[_META_KEY]))
            arrays = {key: data[key].copy() for key in data.files if key != _META_KEY}
    except (OSError, KeyError, ValueError) as error:
        raise CheckpointIntegrityError(f"{path}: unreadable checkpoint ({error})")

    if meta.get("format_version") != FORMAT_VERSION:
        raise CheckpointIncompatibleError(
            f"{path}: format version {meta.get('format_version')} is not supported (expected {FORMAT_VERSION})"
        )
    try:
        verify_digest(_array_chunks(arrays), meta["digest"])
    except ValueError as error:
        raise CheckpointIntegrityError(f"{path}: {error}")
    if expected_config_hash is not None and meta["config_hash"] != expected_config_hash:
        raise CheckpointIncompatibleError(
            f"{path}: trained for config {meta['config_hash'][:12]}, current config is {expected_config_hash[:12]}"
        )
    if obs_dim is not None and meta["obs_dim"] != obs_dim:
        raise CheckpointIncompatibleError(f"{path}: observation size {meta['obs_dim']}, environment has {obs_dim}")

    sections: dict[str, Params] = {section: {} for section in _SECTIONS}
    for key, arr in arrays.items():
        section, _, name = key.partition(".")
        sections.setdefault(section, {})[name] = arr
    return Checkpoint(
        params=sections["param"],
        adam=AdamState(m=sections["adam_m"], v=sections["adam_v"], step=int(meta["adam_step"])),
        iteration=int(meta["iteration"]),
        config_hash=meta["config_hash"],
        ppo_config=PpoConfig.model_validate(meta["ppo_config"]),
        rng_state=meta["rng_state"],
    )
