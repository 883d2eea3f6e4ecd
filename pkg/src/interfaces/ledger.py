import numpy as np
from pydantic import BaseModel, computed_field

KWS_PER_KWH = 3600.0


class EnergyLedger(BaseModel):
    """Time-integrated network energy of one simulation (kWh) plus the overlap clock.

    Overlap and elapsed time are kept as integer tick counts so they stay exact.
    """

    dt: float = 0.1
    E_T: float = 0.0
    E_B_gross: float = 0.0
    E_R: float = 0.0
    overlap_ticks: int = 0
    elapsed_ticks: int = 0

    @computed_field  # type: ignore[prop-decorator]
    @property
    def E_total(self) -> float:
        return self.E_T - self.E_R

    @computed_field  # type: ignore[prop-decorator]
    @property
    def overlap_seconds(self) -> float:
        return self.overlap_ticks * self.dt

    @computed_field  # type: ignore[prop-decorator]
    @property
    def elapsed_seconds(self) -> float:
        return self.elapsed_ticks * self.dt

    @property
    def regen_utilisation(self) -> float:
        """Share of braking energy reused by traction, E_R / E_B_gross."""
        return self.E_R / self.E_B_gross if self.E_B_gross > 0 else 0.0

    def accumulate(self, traction_kw: np.ndarray, braking_kw: np.ndarray, beta3: float) -> np.ndarray:
        """Add a run of ticks of network traction/braking power; returns per-tick regenerative power.

        Regenerative power per tick is min(sum P_T, beta3 * sum P_B); whatever braking
        power exceeds it is dissipated.
        """
        regen_kw = np.minimum(traction_kw, beta3 * braking_kw)
        scale = self.dt / KWS_PER_KWH
        self.E_T += float(np.sum(traction_kw)) * scale
        self.E_B_gross += float(np.sum(braking_kw)) * scale
        self.E_R += float(np.sum(regen_kw)) * scale
        self.overlap_ticks += int(np.count_nonzero((traction_kw > 0) & (braking_kw > 0)))
        self.elapsed_ticks += len(traction_kw)
        return regen_kw
