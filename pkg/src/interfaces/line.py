from pydantic import BaseModel, ConfigDict, Field, model_validator

LINE_SPEED_LIMIT_KMH = 80.0


class SegmentRecord(BaseModel):
    """One inter-station run; dwell belongs to the arrival station."""

    model_config = ConfigDict(frozen=True)

    from_station: str
    to_station: str
    distance: float = Field(gt=0, description="km")
    nominal_cruise_speed: float = Field(gt=0, description="km/h")
    nominal_dwell: float = Field(ge=0, description="s, at to_station")

    @property
    def label(self) -> str:
        return f"{self.from_station}->{self.to_station}"

    @property
    def distance_m(self) -> float:
        return self.distance * 1000.0

    @property
    def cruise_speed_ms(self) -> float:
        return self.nominal_cruise_speed / 3.6


class LineDataset(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    segments: tuple[SegmentRecord, ...]
    speed_limit: float = Field(default=LINE_SPEED_LIMIT_KMH, gt=0, description="km/h")

    @model_validator(mode="after")
    def _connected_and_bounded(self) -> "LineDataset":
        for i, (a, b) in enumerate(zip(self.segments, self.segments[1:])):
            if a.to_station != b.from_station:
                raise ValueError(f"segment {i + 1} ({b.label}) does not start where segment {i} ({a.label}) ends")
        for i, seg in enumerate(self.segments):
            if seg.nominal_cruise_speed > self.speed_limit:
                raise ValueError(f"segment {i} ({seg.label}) cruise speed exceeds {self.speed_limit} km/h")
        return self

    @property
    def stations(self) -> list[str]:
        if not self.segments:
            return []
        return [self.segments[0].from_station, *(s.to_station for s in self.segments)]

    @property
    def total_length_km(self) -> float:
        return sum(s.distance for s in self.segments)

    @property
    def total_length_m(self) -> float:
        return self.total_length_km * 1000.0
