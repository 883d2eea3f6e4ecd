import csv
import io
import logging
import os
from pathlib import Path

from pydantic import ValidationError

from src.config import ConfigError
from src.interfaces.line import LINE_SPEED_LIMIT_KMH, LineDataset, SegmentRecord

logger = logging.getLogger(__name__)

HEADER = ("from", "to", "distance_km", "cruise_kmh", "dwell_s")


class LineParseError(ConfigError):
    """Malformed line file: wrong header, column count, or a non-numeric field."""


class LineValidationError(ConfigError):
    """Well-formed line file whose values break a dataset invariant."""


def _parse_float(raw: str, *, source: str, row: int, field: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise LineParseError(f"{field} is not a number: {raw!r}", source=source, location=f"row {row}, {field}")


def parse_line(
    text: str,
    *,
    name: str = "line",
    source: str = "<text>",
    speed_limit: float = LINE_SPEED_LIMIT_KMH,
) -> LineDataset:
    """Parse a line table (`from,to,distance_km,cruise_kmh,dwell_s`) preserving row order.

    Row numbers in errors are 1-based file lines, so the header is row 1.
    """
    reader = csv.reader(io.StringIO(text))
    rows = [(reader.line_num, row) for row in reader if any(cell.strip() for cell in row)]
    if not rows:
        raise LineParseError("empty document", source=source)

    header_row, header = rows[0]
    if tuple(cell.strip() for cell in header) != HEADER:
        raise LineParseError(f"expected header {','.join(HEADER)}", source=source, location=f"row {header_row}")

    segments: list[SegmentRecord] = []
    for row_number, row in rows[1:]:
        if len(row) != len(HEADER):
            raise LineParseError(
                f"expected {len(HEADER)} columns, got {len(row)}", source=source, location=f"row {row_number}"
            )
        from_station, to_station = row[0].strip(), row[1].strip()
        if not from_station or not to_station:
            raise LineParseError("station name is empty", source=source, location=f"row {row_number}")
        distance = _parse_float(row[2], source=source, row=row_number, field="distance_km")
        cruise = _parse_float(row[3], source=source, row=row_number, field="cruise_kmh")
        dwell = _parse_float(row[4], source=source, row=row_number, field="dwell_s")

        label = f"{from_station}->{to_station}"
        location = f"row {row_number}, segment {label}"
        if distance <= 0:
            raise LineValidationError(f"distance must be > 0, got {distance}", source=source, location=location)
        if not 0 < cruise <= speed_limit:
            raise LineValidationError(
                f"cruise speed {cruise} km/h outside (0, {speed_limit}]", source=source, location=location
            )
        if dwell < 0:
            raise LineValidationError(f"dwell must be >= 0, got {dwell}", source=source, location=location)
        if segments and segments[-1].to_station != from_station:
            raise LineValidationError(
                f"chain broken: previous segment arrives at {segments[-1].to_station}",
                source=source,
                location=location,
            )
        segments.append(
            SegmentRecord(
                from_station=from_station,
                to_station=to_station,
                distance=distance,
                nominal_cruise_speed=cruise,
                nominal_dwell=dwell,
            )
        )

    if not segments:
        raise LineValidationError("line has no segments", source=source)
    try:
        return LineDataset(name=name, segments=tuple(segments), speed_limit=speed_limit)
    except ValidationError as error:
        raise LineValidationError(error.errors()[0]["msg"], source=source)


def load_line(path: str | os.PathLike[str], *, speed_limit: float = LINE_SPEED_LIMIT_KMH) -> LineDataset:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise LineParseError("file not found", source=str(path))
    dataset = parse_line(text, name=path.stem, source=str(path), speed_limit=speed_limit)
    logger.info(
        "loaded line %s: %d stations, %d segments, %.2f km",
        dataset.name,
        len(dataset.stations),
        len(dataset.segments),
        dataset.total_length_km,
    )
    return dataset


def serialize_line(dataset: LineDataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for seg in dataset.segments:
        writer.writerow([seg.from_station, seg.to_station, repr(seg.distance), repr(seg.nominal_cruise_speed),
                         repr(seg.nominal_dwell)])
    return buf.getvalue()


def reverse_direction(dataset: LineDataset) -> LineDataset:
    """The same line travelled the other way.

    A station keeps its dwell whichever way it is approached. The reversed run
    ends at the old origin, which has no recorded dwell; it takes the old
    terminal's dwell instead, which keeps the operation an exact involution.
    Terminal dwells never enter the simulation.
    """
    segments = dataset.segments
    if not segments:
        return dataset
    reversed_segments = []
    for i in range(len(segments) - 1, -1, -1):
        seg = segments[i]
        dwell = segments[i - 1].nominal_dwell if i > 0 else segments[-1].nominal_dwell
        reversed_segments.append(
            SegmentRecord(
                from_station=seg.to_station,
                to_station=seg.from_station,
                distance=seg.distance,
                nominal_cruise_speed=seg.nominal_cruise_speed,
                nominal_dwell=dwell,
            )
        )
    return LineDataset(name=dataset.name, segments=tuple(reversed_segments), speed_limit=dataset.speed_limit)
