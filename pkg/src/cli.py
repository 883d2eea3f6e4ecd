"""Command-line entry point: `metro-regen <command> [options]`.

Exit codes: 0 on success, 1 on a runtime failure, 2 when a configuration,
data file or comparison request is rejected.
"""

import argparse
import csv
import json
import logging
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path

from src.config import (
    ConfigError,
    DisturbanceConfig,
    EnvConfig,
    PpoConfig,
    RunConfig,
    TrainPhysics,
    config,
    load_env_config,
    load_physics,
    load_ppo_config,
    load_run_config,
)
from src.cryptography import config_hash
from src.dynamics import InfeasibleSegmentError, plan_profile
from src.interfaces.line import LineDataset
from src.interfaces.reports import EpisodeSummary
from src.line_data import load_line, reverse_direction
from src.mdp_env import MetroTimetableEnv
from src.ppo.checkpoint import CheckpointIncompatibleError, CheckpointIntegrityError, load_checkpoint
from src.ppo.trainer import evaluate, train
from src.reports import (
    ComparisonRefusedError,
    build_report,
    compare_reports,
    comparison_lines,
    read_report,
    write_comparison_csv,
    write_json,
)

logger = logging.getLogger(__name__)

SWEEP_HEADER = ("probability_per_stop", "label", "E_T_kWh", "E_R_kWh", "E_total_kWh", "overlap_s", "total_time_s",
                "n_seeds", "config_hash")


@dataclass(frozen=True)
class Inputs:
    run: RunConfig
    line: LineDataset
    physics: TrainPhysics
    env_config: EnvConfig
    ppo_config: PpoConfig

    @property
    def config_hash(self) -> str:
        return self.hash_for(self.env_config)

    def hash_for(self, env_config: EnvConfig) -> str:
        return config_hash(
            self.physics.model_dump(mode="json"),
            env_config.model_dump(mode="json"),
            self.line.model_dump(mode="json"),
        )

    def make_env(self, *, trace: bool = False, env_config: EnvConfig | None = None) -> MetroTimetableEnv:
        return MetroTimetableEnv(self.line, self.physics, env_config or self.env_config, trace=trace)


def parse_seeds(text: str) -> list[int]:
    """`7`, `0,3,5` or an inclusive range `0-49`."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ConfigError(f"invalid seed list {text!r}", source="--seeds")
    if not seeds:
        raise ConfigError("empty seed list", source="--seeds")
    return seeds


def parse_levels(text: str) -> list[float]:
    try:
        levels = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"invalid level list {text!r}", source="--levels")
    if not levels or any(not 0 <= p <= 1 for p in levels):
        raise ConfigError("levels must be probabilities in [0, 1]", source="--levels")
    return levels


def load_inputs(args: argparse.Namespace) -> Inputs:
    run = load_run_config(args.config) if args.config else config.default_run_config()
    if getattr(args, "out", None):
        run = run.model_copy(update={"out_dir": Path(args.out)})
    physics = load_physics(run.physics_file)
    line = load_line(run.line_file, speed_limit=physics.speed_limit * 3.6)
    env_config = load_env_config(run.env_file)
    ppo_config = load_ppo_config(run.ppo_file)
    return Inputs(run=run, line=line, physics=physics, env_config=env_config, ppo_config=ppo_config)


def write_snapshot(inputs: Inputs, command: str, extra: dict | None = None) -> Path:
    """Copy every input file next to the outputs so the job can be rerun from its output directory."""
    snap = inputs.run.out_dir / "config"
    snap.mkdir(parents=True, exist_ok=True)
    names = {}
    for key in ("line_file", "physics_file", "env_file", "ppo_file"):
        src_path: Path = getattr(inputs.run, key)
        shutil.copyfile(src_path, snap / src_path.name)
        names[key] = src_path.name
    run_file = snap / "run.json"
    run_file.write_text(
        json.dumps(
            {**names, "command": command, "config_hash": inputs.config_hash, **(extra or {})},
            indent=2,
        ),
        encoding="utf-8",
    )
    return run_file


def _seeds(args: argparse.Namespace, default: int) -> list[int]:
    if getattr(args, "seeds", None):
        return parse_seeds(args.seeds)
    if getattr(args, "seed", None) is not None:
        return [args.seed]
    return [default]


def run_baseline_episodes(
    env: MetroTimetableEnv, seeds: list[int], trace_dir: Path | None = None
) -> list[EpisodeSummary]:
    episodes = []
    for seed in seeds:
        env.run_baseline(seed)
        summary = env.summary()
        episodes.append(summary)
        if trace_dir is not None and env.sim is not None:
            trace_dir.mkdir(parents=True, exist_ok=True)
            env.sim.write_trace(trace_dir / f"power_seed{seed}.csv")
            write_json(trace_dir / f"episode_seed{seed}.json", summary)
    return episodes


def cmd_validate_data(args: argparse.Namespace) -> int:
    inputs = load_inputs(args)
    for direction, line in (("up", inputs.line), ("down", reverse_direction(inputs.line))):
        for i, seg in enumerate(line.segments):
            try:
                plan = plan_profile(seg.distance_m, seg.cruise_speed_ms, inputs.physics, inputs.env_config.dt)
            except InfeasibleSegmentError as error:
                raise ConfigError(str(error), source=str(inputs.run.line_file), location=f"{direction} segment {i}")
            if plan.triangular:
                logger.warning(
                    "%s segment %s cannot reach %.1f km/h; peak %.1f km/h",
                    direction, seg.label, seg.nominal_cruise_speed, plan.commanded_cruise_speed * 3.6,
                )
    print(
        f"{inputs.line.name}: {len(inputs.line.stations)} stations, {len(inputs.line.segments)} segments, "
        f"{inputs.line.total_length_km:.2f} km; config {inputs.config_hash[:12]}"
    )
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    inputs = load_inputs(args)
    seeds = _seeds(args, inputs.env_config.seed)
    out_dir = inputs.run.out_dir
    env = inputs.make_env(trace=args.trace)
    episodes = run_baseline_episodes(env, seeds, out_dir / "traces" if args.trace else None)
    report = build_report(args.label, inputs.config_hash, episodes)
    path = write_json(out_dir / f"{args.label}.json", report)
    write_snapshot(inputs, "baseline", {"seeds": seeds})
    print(
        f"{args.label}: E_T={report.E_T:.1f} kWh E_R={report.E_R:.1f} kWh E_total={report.E_total:.1f} kWh "
        f"overlap={report.overlap_seconds:.1f} s over {report.n_seeds} seeds -> {path}"
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    inputs = load_inputs(args)
    ppo_config = inputs.ppo_config
    if args.seed is not None:
        ppo_config = ppo_config.model_copy(update={"seed": args.seed})
    checkpoint = train(
        ppo_config,
        inputs.make_env(),
        out_dir=inputs.run.out_dir,
        config_hash=inputs.config_hash,
        resume=args.resume,
        iterations=args.iterations,
    )
    write_snapshot(inputs, "train", {"ppo_seed": ppo_config.seed})
    print(f"checkpoint: {checkpoint}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    inputs = load_inputs(args)
    env = inputs.make_env()
    ckpt = load_checkpoint(
        args.checkpoint, expected_config_hash=inputs.config_hash, obs_dim=env.observation_space.shape[0]
    )
    seeds = _seeds(args, inputs.env_config.seed)
    episodes = evaluate(ckpt.params, env, seeds, deterministic=not args.stochastic)
    report = build_report(args.label, inputs.config_hash, episodes)
    path = write_json(inputs.run.out_dir / f"{args.label}.json", report)
    write_snapshot(inputs, "evaluate", {"seeds": seeds, "checkpoint": str(args.checkpoint)})
    print(
        f"{args.label}: E_T={report.E_T:.1f} kWh E_R={report.E_R:.1f} kWh E_total={report.E_total:.1f} kWh "
        f"overlap={report.overlap_seconds:.1f} s over {report.n_seeds} seeds -> {path}"
    )
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    comparison = compare_reports(read_report(args.baseline), read_report(args.candidate))
    if args.out:
        out = Path(args.out)
        write_json(out / "comparison.json", comparison)
        write_comparison_csv(out / "comparison.csv", comparison)
    for line in comparison_lines(comparison):
        print(line)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    inputs = load_inputs(args)
    seeds = _seeds(args, inputs.env_config.seed)
    levels = parse_levels(args.levels)
    params = None
    if args.checkpoint:
        params = load_checkpoint(args.checkpoint, obs_dim=inputs.env_config.fleet.num_trains * 8).params

    out = inputs.run.out_dir / "sweep.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(SWEEP_HEADER)
        for level in levels:
            disturbance: DisturbanceConfig = inputs.env_config.disturbance.model_copy(
                update={"probability_per_stop": level}
            )
            env_config = inputs.env_config.model_copy(update={"disturbance": disturbance})
            env = inputs.make_env(env_config=env_config)
            level_hash = inputs.hash_for(env_config)
            runs = [("baseline", run_baseline_episodes(env, seeds))]
            if params is not None:
                runs.append(("policy", evaluate(params, env, seeds, deterministic=not args.stochastic)))
            for label, episodes in runs:
                report = build_report(label, level_hash, episodes)
                writer.writerow([level, label, report.E_T, report.E_R, report.E_total, report.overlap_seconds,
                                 report.total_time, report.n_seeds, level_hash])
                logger.info("level %.2f %s: overlap=%.1f s E_total=%.1f kWh", level, label,
                            report.overlap_seconds, report.E_total)
    write_snapshot(inputs, "sweep", {"seeds": seeds, "levels": levels})
    print(f"sweep: {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metro-regen", description="Metro timetable rescheduling for regenerative braking."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("-c", "--config", type=str, help="run config JSON naming the line, physics, env and ppo files")
        p.add_argument("-o", "--out", type=str, help="output directory (overrides the run config)")

    p = sub.add_parser("validate-data", help="check the line, physics and config files")
    common(p)
    p.set_defaults(func=cmd_validate_data)

    p = sub.add_parser("baseline", help="run the no-action baseline")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=str, help="e.g. 0-49 or 1,2,3")
    p.add_argument("--trace", action="store_true", help="write per-tick power traces and episode summaries")
    p.add_argument("--label", default="baseline")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("train", help="train a PPO policy")
    common(p)
    p.add_argument("--seed", type=int, help="override the PPO seed")
    p.add_argument("--iterations", type=int, help="total iterations (defaults to the PPO config)")
    p.add_argument("--resume", type=str, help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=str)
    p.add_argument("--stochastic", action="store_true", help="sample actions instead of using the policy mean")
    p.add_argument("--label", default="policy")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="compare two reports")
    p.add_argument("baseline")
    p.add_argument("candidate")
    p.add_argument("-o", "--out", type=str)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="baseline (and optionally a policy) across disturbance levels")
    common(p)
    p.add_argument("--levels", default="0,0.1,0.2,0.3,0.4,0.5")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=str)
    p.add_argument("--checkpoint", type=str)
    p.add_argument("--stochastic", action="store_true")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=config.LOG_LEVEL.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, ComparisonRefusedError, CheckpointIncompatibleError, CheckpointIntegrityError) as error:
        logger.error("%s", error)
        print(f"error: {error}", file=sys.stderr)
        return 2
    except Exception as error:
        logger.exception("%s failed: %s", args.command, error)
        return 1


if __name__ == "__main__":
    sys.exit(main())
