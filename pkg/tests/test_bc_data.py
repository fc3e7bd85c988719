import numpy as np
import pytest

from bc_data import (
    INNER_SURFACE, OUTER_SURFACE, dumps_bc_csv, format_value, ingest_bc_csv, init_linear_profile, read_bc_csv,
    signals_from_bc, synth_annual_bc, write_bc_csv,
)
from errors import IngestionError


def _write(tmp_path, text: str, name: str = "bc.csv"):
    path = tmp_path / name
    path.write_bytes(text.encode("utf-8"))
    return path


def test_read_small_file(tmp_path):
    path = _write(tmp_path, "time_s,left,right\n# units: s, degC, degC\n0,12.5,19.1\n3600,12.3,19.1\n7200,12,19\n")
    bc = read_bc_csv(path)
    assert len(bc) == 3
    assert bc.units == "s, degC, degC"
    assert bc.times == [0.0, 3600.0, 7200.0]
    assert bc.left == [12.5, 12.3, 12.0]


def test_non_monotone_time_reports_file_row(tmp_path):
    path = _write(tmp_path, "time_s,left,right\n# units: s, degC, degC\n0,1,2\n0,1,2\n3600,1,2\n")
    with pytest.raises(IngestionError) as info:
        read_bc_csv(path)
    assert info.value.row == 4
    assert info.value.detail.startswith("row 4:")


def test_gap_too_large(tmp_path):
    path = _write(tmp_path, "time_s,left,right\n0,1,2\n3600,1,2\n7200,1,2\n18000,1,2\n")
    with pytest.raises(IngestionError) as info:
        read_bc_csv(path, max_gap_factor=2.0)
    assert info.value.row == 5
    assert len(read_bc_csv(path, max_gap_factor=3.0)) == 4


@pytest.mark.parametrize("text, row", [
    ("time,left,right\n0,1,2\n3600,1,2\n", 1),
    ("time_s,left,right\r\n0,1,2\r\n3600,1,2\r\n", 2),
    ("time_s,left,right\n0,1\n3600,1,2\n", 2),
    ("time_s,left,right\n0,1,abc\n3600,1,2\n", 2),
    ("time_s,left,right\n0,1,2\n# note\n3600,1,2\n", 3),
    ("time_s,left,right\n0,1,nan\n3600,1,2\n", 2),
])
def test_schema_violations(tmp_path, text, row):
    with pytest.raises(IngestionError) as info:
        read_bc_csv(_write(tmp_path, text))
    assert info.value.row == row


def test_missing_file(tmp_path):
    with pytest.raises(IngestionError):
        read_bc_csv(tmp_path / "absent.csv")


def test_format_value():
    assert format_value(3600.0) == "3600"
    assert format_value(12.345) == "12.345"
    assert format_value(-0.5) == "-0.5"


def test_write_read_round_trip_is_byte_identical(tmp_path):
    bc = synth_annual_bc(5, hours=48)
    path = write_bc_csv(bc, tmp_path / "nested" / "bc.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode("utf-8") == dumps_bc_csv(read_bc_csv(path))


def test_synthetic_year_is_deterministic():
    a = synth_annual_bc(11, hours=240)
    b = synth_annual_bc(11, hours=240)
    c = synth_annual_bc(12, hours=240)
    assert a == b
    assert a.left != c.left
    assert a.times[1] == 3600.0
    assert a.units == "s, degC, degC"


def test_synthetic_amplitude_bounds():
    bc = synth_annual_bc(3)
    assert len(bc) == 8760
    left, right = np.asarray(bc.left), np.asarray(bc.right)
    assert np.all(np.abs(left - OUTER_SURFACE.mean) <= OUTER_SURFACE.bound + 1e-3)
    assert np.all(np.abs(right - INNER_SURFACE.mean) <= INNER_SURFACE.bound + 1e-3)
    # 夏（8 月）は冬（1 月）より暖かい
    assert left[24 * 210:24 * 240].mean() > left[:24 * 30].mean()


def test_discarded_days_shift_time_origin():
    bc = synth_annual_bc(1, hours=49)
    left, right = signals_from_bc(bc, discard_days=1.0)
    assert left.start == 0.0
    assert left.end == 24 * 3600.0
    assert left.evaluate(0.0) == pytest.approx(bc.left[24])
    assert right.evaluate(left.end) == pytest.approx(bc.right[48])


def test_discard_leaving_too_little(tmp_path):
    path = _write(tmp_path, "time_s,left,right\n0,1,2\n3600,1,2\n")
    with pytest.raises(IngestionError):
        ingest_bc_csv(path, discard_days=1.0)


def test_linear_profile():
    profile = init_linear_profile(10.0, 20.0, 0.5)
    assert profile(0.25) == pytest.approx(15.0)
    assert np.allclose(profile(np.array([0.0, 0.5])), [10.0, 20.0])
