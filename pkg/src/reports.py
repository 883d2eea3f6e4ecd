import csv
import logging
import math
import os
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from src.config import ConfigError
from src.interfaces.reports import ComparisonReport, EpisodeSummary, EvaluationReport, LedgerStats, ReportRow

logger = logging.getLogger(__name__)

COMPARISON_HEADER = (
    "label", "E_T_kWh", "E_R_kWh", "E_total_kWh", "overlap_s", "total_time_s", "n_seeds",
    "E_T_std", "E_R_std", "E_total_std", "overlap_std", "total_time_std",
)


class ComparisonRefusedError(ValueError):
    def __init__(self, baseline_hash: str, candidate_hash: str):
        super().__init__(
            f"reports were produced under different configurations ({baseline_hash[:12]} vs {candidate_hash[:12]})"
        )
        self.baseline_hash = baseline_hash
        self.candidate_hash = candidate_hash


def ledger_stats(episodes: list[EpisodeSummary]) -> LedgerStats:
    if not episodes:
        raise ValueError("no episodes to aggregate")
    columns = {
        "E_T": [e.ledger.E_T for e in episodes],
        "E_R": [e.ledger.E_R for e in episodes],
        "E_total": [e.ledger.E_total for e in episodes],
        "overlap_seconds": [e.ledger.overlap_seconds for e in episodes],
        "total_time": [e.total_time for e in episodes],
    }
    stats: dict[str, float] = {}
    for name, values in columns.items():
        arr = np.asarray(values, dtype=np.float64)
        stats[name] = float(arr.mean())
        stats[f"{name}_std"] = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    regen = np.asarray([e.ledger.regen_utilisation for e in episodes], dtype=np.float64)
    return LedgerStats(**stats, regen_utilisation=float(regen.mean()), n_seeds=len(episodes))


def build_report(label: str, config_hash: str, episodes: list[EpisodeSummary]) -> EvaluationReport:
    return EvaluationReport(
        label=label,
        config_hash=config_hash,
        seeds=[e.seed for e in episodes if e.seed is not None],
        episodes=episodes,
        **ledger_stats(episodes).model_dump(),
    )


def relative_change(base: float, ours: float) -> float:
    """(ours - base) / base in percent; 0 when both are 0."""
    if base == 0:
        return 0.0 if ours == 0 else math.copysign(math.inf, ours)
    return (ours - base) / base * 100.0


def format_pct(value: float) -> str:
    """Percent to one decimal, truncated toward zero (10.96 -> "10.9%")."""
    if not math.isfinite(value):
        return str(value)
    return f"{math.trunc(value * 10.0) / 10.0:.1f}%"


def compare_reports(baseline: ReportRow, candidate: ReportRow) -> ComparisonReport:
    if baseline.config_hash != candidate.config_hash:
        raise ComparisonRefusedError(baseline.config_hash, candidate.config_hash)
    rows = [ReportRow.model_validate(r.model_dump(include=set(ReportRow.model_fields))) for r in (baseline, candidate)]
    return ComparisonReport(
        config_hash=baseline.config_hash,
        rows=rows,
        traction_energy_reduction_pct=-relative_change(baseline.E_T, candidate.E_T),
        overlap_increase_pct=relative_change(baseline.overlap_seconds, candidate.overlap_seconds),
        net_energy_reduction_pct=-relative_change(baseline.E_total, candidate.E_total),
    )


def write_json(path: str | os.PathLike[str], report: ReportRow | ComparisonReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return path


def read_report(path: str | os.PathLike[str]) -> ReportRow:
    path = Path(path)
    try:
        return EvaluationReport.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("file not found", source=str(path))
    except ValidationError as error:
        first = error.errors()[0]
        raise ConfigError(first["msg"], source=str(path), location=".".join(str(p) for p in first["loc"]))


def write_comparison_csv(path: str | os.PathLike[str], comparison: ComparisonReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(COMPARISON_HEADER)
        for row in comparison.rows:
            writer.writerow([
                row.label, row.E_T, row.E_R, row.E_total, row.overlap_seconds, row.total_time, row.n_seeds,
                row.E_T_std, row.E_R_std, row.E_total_std, row.overlap_seconds_std, row.total_time_std,
            ])
    return path


def comparison_lines(comparison: ComparisonReport) -> list[str]:
    lines = [
        f"{'label':<16}{'E_T kWh':>14}{'E_R kWh':>12}{'E_total kWh':>14}{'overlap s':>12}{'total s':>10}{'n':>5}"
    ]
    for row in comparison.rows:
        lines.append(
            f"{row.label:<16}{row.E_T:>14.1f}{row.E_R:>12.1f}{row.E_total:>14.1f}"
            f"{row.overlap_seconds:>12.1f}{row.total_time:>10.1f}{row.n_seeds:>5d}"
        )
    lines.append(f"traction energy reduction: {format_pct(comparison.traction_energy_reduction_pct)}")
    lines.append(f"overlap time increase:     {format_pct(comparison.overlap_increase_pct)}")
    lines.append(f"net energy reduction:      {format_pct(comparison.net_energy_reduction_pct)}")
    return lines
