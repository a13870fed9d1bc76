import csv
import json
import math

import pytest

from avrpid.bench import (
    ComparisonReport, ReferenceTableError, SweepSpec, emit_report, emit_sweep, load_reference_table,
    load_tolerances, match_poles, read_report_json, report_csv_header, reproduce_entry,
    reproduce_table, robustness_sweep, select_entries,
)
from avrpid.lintf import AvrParams, PidGains

TSA = PidGains(1.1281, 0.9567, 0.5671)


@pytest.fixture(scope="module")
def table():
    return load_reference_table()


def test_loader_rows(table):
    names = [e.algorithm for e in table]
    assert len(table) == 29
    assert len(set(names)) == len(names)
    pso, tsa, tcga = select_entries(table, ["pso", "TSA", "tcga"])
    assert pso.gains == PidGains(1.7774, 0.3827, 0.3184)
    assert pso.objective == "ITSE"
    assert pso.published["pm_deg"] == 62.2
    assert len(pso.published["poles"]) == 5
    assert tsa.gains == TSA
    assert tcga.gains is None and not tcga.reproducible


def test_infinite_values_parse(table):
    infs = [e for e in table for v in e.published.values() if isinstance(v, float) and math.isinf(v)]
    assert infs


def _write(tmp_path, rows):
    path = tmp_path / "t.json"
    path.write_text(json.dumps(rows))
    return path


@pytest.mark.parametrize("row,field", [
    ({"algorithm": "X", "objective": "ITSE", "kp": "a", "ki": 1, "kd": 1}, "kp"),
    ({"algorithm": "X", "objective": "ITSE", "kp": 1, "ki": -1, "kd": 1}, "ki"),
    ({"algorithm": "X", "kp": 1, "ki": 1, "kd": 1}, "objective"),
    ({"algorithm": "X", "objective": "ITSE", "kp": 1, "ki": 1, "kd": 1, "published": {"foo": 1}}, "published.foo"),
    ({"algorithm": "X", "objective": "ITSE", "kp": 1, "ki": 1, "kd": 1, "extra": 0}, "extra"),
])
def test_parse_errors_name_row_and_field(tmp_path, row, field):
    good = {"algorithm": "A", "objective": "ITSE", "kp": 1, "ki": 1, "kd": 1}
    with pytest.raises(ReferenceTableError) as exc:
        load_reference_table(_write(tmp_path, [good, row]))
    assert exc.value.row == 1
    assert exc.value.field == field


def test_match_poles_greedy():
    pairs = match_poles([-1 + 2j, -5], [-5.1, -1.02 + 2j, -1.02 - 2j])
    assert pairs == [(-1 + 2j, -1.02 + 2j), (-5, -5.1)]


def test_reproduce_pso_ok(table):
    row = reproduce_entry(select_entries(table, ["PSO"])[0])
    assert row.status == "ok"
    assert row.comparison("pm_deg").computed == pytest.approx(62.2, abs=2)
    assert row.comparison("tr_s").note in ("10-90", "0-100")


def test_reproduce_no_gains(table):
    row = reproduce_entry(select_entries(table, ["TCGA"])[0])
    assert row.status == "no-gains" and row.comparisons == []


def test_reproduce_unstable():
    from avrpid.bench import ReferenceEntry
    row = reproduce_entry(ReferenceEntry("X", "ITSE", PidGains(100.0, 50.0, 0.0), {"peak_pu": 1.0}))
    assert row.status == "unstable"


def test_empty_report_is_header_only(tmp_path):
    path = tmp_path / "r.csv"
    emit_report(ComparisonReport([], load_tolerances()), path)
    lines = path.read_text().splitlines()
    assert lines == [",".join(report_csv_header())]


def test_report_json_round_trip(tmp_path, table):
    rep = reproduce_table(select_entries(table, ["PSO", "SFS", "TCGA"]))
    path = tmp_path / "r.json"
    emit_report(rep, path, "json")
    back = read_report_json(path)
    assert back == rep


def test_report_csv_columns(tmp_path, table):
    rep = reproduce_table(select_entries(table, ["PSO", "ABC"]))
    path = tmp_path / "r.csv"
    emit_report(rep, path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert [r["algorithm"] for r in rows] == ["PSO", "ABC"]
    assert rows[0]["pm_deg_pass"] == "true"
    assert float(rows[0]["peak_pu_published"]) == 1.299


def test_sweep_rows_and_determinism(tmp_path):
    rows = robustness_sweep(AvrParams(), TSA)
    assert len(rows) == 17
    assert rows[0].parameter == "nominal"
    assert all(r.stable for r in rows)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_sweep(rows, a)
    emit_sweep(robustness_sweep(AvrParams(), TSA, workers=3), b)
    assert a.read_bytes() == b.read_bytes()


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(("K_A",))
    with pytest.raises(ValueError):
        SweepSpec(levels=(-0.5, 0.5))
