from pydantic import BaseModel, Field

from src.interfaces.ledger import EnergyLedger


class DecisionRecord(BaseModel):
    t: float
    train: int
    cruise_cmd_kmh: float
    dwell_cmd: float
    reward: float = 0.0


class EpisodeSummary(BaseModel):
    seed: int | None = None
    ledger: EnergyLedger
    total_time: float
    order_violations: int = 0
    decisions: list[DecisionRecord] = Field(default_factory=list)


class RunContext(BaseModel):
    label: str
    config_hash: str
    seeds: list[int] = Field(default_factory=list)


class LedgerStats(BaseModel):
    """Mean and standard deviation over episodes of the comparison columns."""

    E_T: float
    E_R: float
    E_total: float
    overlap_seconds: float
    total_time: float
    E_T_std: float = 0.0
    E_R_std: float = 0.0
    E_total_std: float = 0.0
    overlap_seconds_std: float = 0.0
    total_time_std: float = 0.0
    regen_utilisation: float = 0.0
    n_seeds: int = 1


class ReportRow(RunContext, LedgerStats):
    pass


class EvaluationReport(ReportRow):
    episodes: list[EpisodeSummary] = Field(default_factory=list)


class ComparisonReport(BaseModel):
    config_hash: str
    rows: list[ReportRow]
    traction_energy_reduction_pct: float
    overlap_increase_pct: float
    net_energy_reduction_pct: float
