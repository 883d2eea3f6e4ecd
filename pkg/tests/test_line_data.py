import pytest

from src.line_data import (
    LineParseError,
    LineValidationError,
    load_line,
    parse_line,
    reverse_direction,
    serialize_line,
)
from tests.conftest import TOY_LINE


def test_shipped_line_shape(xiamen_line):
    assert len(xiamen_line.stations) == 24
    assert len(xiamen_line.segments) == 23
    assert xiamen_line.stations[0] == "Zhenghailuzhan"
    assert xiamen_line.stations[-1] == "Yanneibeiguangchangzhan"
    # hand-summed distance column
    assert xiamen_line.total_length_km == pytest.approx(30.38, abs=1e-9)
    assert all(0 < s.nominal_cruise_speed <= 80.0 for s in xiamen_line.segments)


def test_first_row_fields(xiamen_line):
    first = xiamen_line.segments[0]
    assert (first.from_station, first.to_station) == ("Zhenghailuzhan", "Zhongshangongyuanzhan")
    assert first.distance == pytest.approx(0.89)
    assert first.distance_m == pytest.approx(890.0)
    assert first.nominal_cruise_speed == pytest.approx(68.4)
    assert first.nominal_dwell == 25


def test_reverse_is_involution(xiamen_line):
    assert reverse_direction(reverse_direction(xiamen_line)) == xiamen_line


def test_reverse_keeps_station_dwell(toy_line):
    rev = reverse_direction(toy_line)
    assert rev.stations == ["C", "B", "A"]
    assert [s.distance for s in rev.segments] == [1.2, 1.0]
    # C->B arrives at B, which keeps its 30 s dwell
    assert rev.segments[0].nominal_dwell == toy_line.segments[0].nominal_dwell


def test_serialize_then_parse_is_identity(xiamen_line):
    assert parse_line(serialize_line(xiamen_line), name=xiamen_line.name) == xiamen_line


@pytest.mark.parametrize(
    "text, error, fragment",
    [
        ("", LineParseError, "empty document"),
        ("a,b,c\nA,B,1,2,3\n", LineParseError, "expected header"),
        ("from,to,distance_km,cruise_kmh,dwell_s\nA,B,1.0,60\n", LineParseError, "row 2"),
        ("from,to,distance_km,cruise_kmh,dwell_s\nA,B,x,60,30\n", LineParseError, "distance_km"),
        ("from,to,distance_km,cruise_kmh,dwell_s\nA,B,1.0,60,30\nC,D,1.0,60,30\n", LineValidationError, "C->D"),
        ("from,to,distance_km,cruise_kmh,dwell_s\nA,B,0,60,30\n", LineValidationError, "distance"),
        ("from,to,distance_km,cruise_kmh,dwell_s\nA,B,1.0,90,30\n", LineValidationError, "cruise speed"),
        ("from,to,distance_km,cruise_kmh,dwell_s\nA,B,1.0,60,-1\n", LineValidationError, "dwell"),
        ("from,to,distance_km,cruise_kmh,dwell_s\n", LineValidationError, "no segments"),
    ],
)
def test_parse_errors(text, error, fragment):
    with pytest.raises(error) as exc:
        parse_line(text)
    assert fragment in str(exc.value)


def test_chain_break_reports_row():
    text = "from,to,distance_km,cruise_kmh,dwell_s\nA,B,1.0,60,30\nC,D,1.0,60,30\n"
    with pytest.raises(LineValidationError) as exc:
        parse_line(text, source="line.csv")
    assert exc.value.source == "line.csv"
    assert exc.value.location.startswith("row 3")


def test_missing_file_names_path(tmp_path):
    missing = tmp_path / "nope.csv"
    with pytest.raises(LineParseError) as exc:
        load_line(missing)
    assert str(missing) in str(exc.value)


def test_load_line_uses_file_stem(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text(TOY_LINE, encoding="utf-8")
    line = load_line(path)
    assert line.name == "toy"
    assert line.total_length_m == pytest.approx(2200.0)
