import json
from importlib import resources

import numpy as np
import pytest

from convrptw import read_instance, read_solution
from convrptw.cli import main
from convrptw.io import write_instance
from convrptw.model import evaluate_solution

from conftest import line_instance


@pytest.fixture
def c101(tmp_path):
    path = tmp_path / "c101.json"
    assert main(["generate", "--bundled", "C101", "--out", str(path)]) == 0
    return path


def solve_args(inst, out, *extra):
    return ["solve", "--instance", str(inst), "--out", str(out), "--ct-max", "5", *extra]


def test_generate_defaults(c101):
    inst = read_instance(c101)
    assert inst.n_customers == 10 and inst.n_days == 5
    assert list(inst.labels[1:]) == list(range(1, 11))


def test_generate_from_file_with_offset(tmp_path):
    source = resources.files("convrptw") / "data" / "solomon" / "R201.txt"
    (tmp_path / "R201.txt").write_text(source.read_text())
    out = tmp_path / "g.json"
    assert main(["generate", "--solomon", str(tmp_path / "R201.txt"), "--offset", "3",
                 "--customers", "6", "--days", "2", "--out", str(out)]) == 0
    inst = read_instance(out)
    assert list(inst.labels[1:]) == list(range(4, 10)) and inst.n_days == 2


def test_generate_bad_path(tmp_path, capsys):
    code = main(["generate", "--solomon", str(tmp_path / "missing.txt"), "--out",
                 str(tmp_path / "x.json")])
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_solve_tiny_mergeable(tmp_path):
    inst = line_instance([10, 11, 12], [[0, 100]] * 3, [1, 1, 1])
    write_instance(inst, tmp_path / "i.json")
    assert main(solve_args(tmp_path / "i.json", tmp_path / "s.json")) == 0
    sol = read_solution(tmp_path / "s.json", inst)
    m = evaluate_solution(inst, sol)
    assert m.n_vehicles == 1 and m.ptw == 0
    report = json.loads((tmp_path / "s.report.json").read_text())
    assert report["n_vehicles"] == 1 and report["seed"] == 0


def test_solve_is_byte_identical(c101, tmp_path):
    assert main(solve_args(c101, tmp_path / "a.json", "--seed", "7")) == 0
    assert main(solve_args(c101, tmp_path / "b.json", "--seed", "7")) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_solve_infeasible_customer(tmp_path, capsys):
    inst = line_instance([10, 80], [[0, 100], [0, 100]], [1, 1], horizon=100)
    write_instance(inst, tmp_path / "i.json")
    assert main(solve_args(tmp_path / "i.json", tmp_path / "s.json")) == 3
    assert "customer 2" in capsys.readouterr().err
    assert not (tmp_path / "s.json").exists()


def test_solve_corrupt_instance(tmp_path):
    (tmp_path / "i.json").write_text("{broken")
    assert main(solve_args(tmp_path / "i.json", tmp_path / "s.json")) == 2


def test_solve_with_baseline_and_report(c101, tmp_path, capsys):
    assert main(solve_args(c101, tmp_path / "base.json", "--ct-max", "0")) == 0
    assert main(solve_args(c101, tmp_path / "new.json", "--baseline",
                           str(tmp_path / "base.json"))) == 0
    new = json.loads((tmp_path / "new.report.json").read_text())
    assert new["delta_tt"] is not None
    capsys.readouterr()
    assert main(["report", str(tmp_path / "new.report.json"), "--baseline",
                 str(tmp_path / "base.report.json"), "--csv", str(tmp_path / "t.csv")]) == 0
    text = capsys.readouterr().out
    assert "Δ_NV" in text and "new" in text
    assert (tmp_path / "t.csv").read_text().splitlines()[0].startswith("run,NV,TT")


def test_report_mixed_instances(c101, tmp_path):
    other = tmp_path / "r201.json"
    main(["generate", "--bundled", "R201", "--out", str(other)])
    main(solve_args(c101, tmp_path / "a.json"))
    main(solve_args(other, tmp_path / "b.json"))
    assert main(["report", str(tmp_path / "a.report.json"), str(tmp_path / "b.report.json")]) == 2


def test_oracle_and_limit(c101, tmp_path, capsys):
    assert main(["oracle", "--instance", str(c101), "--out", str(tmp_path / "w.json")]) == 0
    assert "min_vehicles=" in capsys.readouterr().out
    inst = read_instance(c101)
    assert evaluate_solution(inst, read_solution(tmp_path / "w.json", inst)).feasible
    assert main(["oracle", "--instance", str(c101), "--max-customers", "5"]) == 4


def test_export_milp(tmp_path):
    inst = line_instance([3, 5], [[0, 50], [0, 50]], [2, 3])
    write_instance(inst, tmp_path / "i.json")
    assert main(["export-milp", "--instance", str(tmp_path / "i.json"), "--vehicles", "2",
                 "--out", str(tmp_path / "m.lp")]) == 0
    text = (tmp_path / "m.lp").read_text()
    assert text.startswith("\\ ") and "Subject To" in text and text.rstrip().endswith("End")


def test_update_and_daily(tmp_path, capsys):
    first, second = tmp_path / "p1.json", tmp_path / "p2.json"
    main(["generate", "--bundled", "C101", "--out", str(first)])
    main(["generate", "--bundled", "C101", "--offset", "3", "--seed", "1", "--out", str(second)])
    assert main(solve_args(first, tmp_path / "s1.json")) == 0
    capsys.readouterr()
    assert main(["update", "--instance", str(second), "--previous", str(tmp_path / "s1.json"),
                 "--out", str(tmp_path / "s2.json"), "--ct-max", "5"]) == 0
    assert "IC=" in capsys.readouterr().out
    report = json.loads((tmp_path / "s2.report.json").read_text())
    assert report["command"] == "update" and 0 <= report["ic"] <= 100
    assert main(["daily", "--instance", str(second), "--day", "0", "--base",
                 str(tmp_path / "s2.json"), "--out", str(tmp_path / "d0.json"),
                 "--ct-max", "5"]) == 0
    assert "inconsistency=0.0%" in capsys.readouterr().out
    # a multi-day instance without --day is refused
    assert main(["daily", "--instance", str(second), "--base", str(tmp_path / "s2.json"),
                 "--out", str(tmp_path / "d.json")]) == 2


def test_matrices_override(tmp_path):
    inst = line_instance([3, 5], [[0, 50], [0, 50]], [2, 3])
    write_instance(inst, tmp_path / "i.json")
    doubled = inst.travel_time / 10 * 2
    np.savetxt(tmp_path / "t.txt", doubled)
    np.savetxt(tmp_path / "d.txt", doubled)
    args = solve_args(tmp_path / "i.json", tmp_path / "s.json")
    assert main([*args, "--time-matrix", str(tmp_path / "t.txt")]) == 2
    assert main([*args, "--time-matrix", str(tmp_path / "t.txt"),
                 "--distance-matrix", str(tmp_path / "d.txt")]) == 0
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["metrics"]["travel_time_min"] == pytest.approx(20.0)


def test_verbose_logs_trace(tmp_path, caplog):
    inst = line_instance([10, 11, 12], [[0, 100]] * 3, [1, 1, 1])
    write_instance(inst, tmp_path / "i.json")
    assert main(solve_args(tmp_path / "i.json", tmp_path / "s.json")) == 0
    assert "trace" not in caplog.text
    assert main([*solve_args(tmp_path / "i.json", tmp_path / "s.json"), "--verbose"]) == 0
    assert '"event": "end"' in caplog.text


def test_portfolio(c101, tmp_path):
    assert main(solve_args(c101, tmp_path / "p.json", "--portfolio", "2", "--ct-max", "2")) == 0
    doc = json.loads((tmp_path / "p.json").read_text())
    assert doc["params"]["portfolio"] == 2
