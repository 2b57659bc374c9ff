import pytest
from hypothesis import given
from hypothesis import strategies as st

from convrptw.report import (
    ReportError,
    ReportTable,
    RunReport,
    build_table,
    improvement,
    read_report,
    write_report,
)


def run(name="C101-x", nv=2, tt=3.5, **kw):
    fields = dict(instance=name, n_vehicles=nv, travel_time_hours=tt, distance_km=210.0,
                  ptw=0.0, ltw=0.0, cpu_seconds=1.25, seed=0)
    fields.update(kw)
    return RunReport(**fields)


def test_vehicle_improvement_from_23_to_16():
    assert improvement(23, 16) == pytest.approx(30.43, abs=0.01)
    assert f"{improvement(23, 16):.1f}" == "30.4"


def test_zero_baseline_is_an_error():
    with pytest.raises(ReportError):
        improvement(0, 1)


def test_single_run_has_no_delta_columns():
    table = build_table([run()])
    assert len(table.rows) == 1
    assert not any(c.startswith("Δ") for c in table.columns)
    assert table.columns == ["run", "NV", "TT", "PTW", "LTW", "IC", "CPU", "seed"]


def test_baseline_adds_delta_columns():
    table = build_table([run(nv=16, tt=9.0)], ["new"], baseline=run(nv=23, tt=10.0))
    row = dict(zip(table.columns, table.rows[0]))
    assert row["Δ_NV"] == "30.4" and row["Δ_TT"] == "10.0"


def test_mixed_instances_refused():
    with pytest.raises(ReportError, match="different instances"):
        build_table([run("a"), run("b")])
    with pytest.raises(ReportError):
        build_table([run("a")], baseline=run("b"))
    with pytest.raises(ReportError):
        build_table([])


@given(st.lists(st.tuples(st.integers(1, 50), st.floats(0, 1e4), st.floats(0, 100)),
                min_size=1, max_size=6))
def test_csv_round_trip(values):
    table = build_table([run(nv=nv, tt=tt, ic=ic, command="update") for nv, tt, ic in values])
    again = ReportTable.from_csv(table.to_csv())
    assert again == table


def test_text_table_is_aligned():
    lines = build_table([run(), run(nv=12)]).to_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("run")
    assert len({len(line) for line in lines[1:]}) == 1


def test_file_round_trip_and_idempotence(tmp_path):
    r = run(ic=7.5, command="update", params={"k_max": 3})
    write_report(r, tmp_path / "a.json")
    first = (tmp_path / "a.json").read_bytes()
    assert read_report(tmp_path / "a.json") == r
    write_report(read_report(tmp_path / "a.json"), tmp_path / "b.json")
    assert (tmp_path / "b.json").read_bytes() == first


@pytest.mark.parametrize("field,value", [("ptw", -1.0), ("ltw", 101.0), ("ic", 250.0),
                                         ("cpu_seconds", -0.5)])
def test_validation(field, value):
    with pytest.raises(ReportError):
        run(**{field: value})


def test_foreign_documents_refused(tmp_path):
    (tmp_path / "x.json").write_text('{"format": "something-else"}')
    with pytest.raises(ReportError, match="not a run report"):
        read_report(tmp_path / "x.json")
    (tmp_path / "y.json").write_text("{not json")
    with pytest.raises(ReportError):
        read_report(tmp_path / "y.json")
