import json
import subprocess
import sys

import pytest

from rlkopt.bench import parse_report
from rlkopt.cli import main
from rlkopt.tsplib import load_instance, parse_tour, serialize_instance, tour_length


def test_solve_prints_a_table(capsys):
    assert main(["solve", "eil51", "--runs", "2", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].split()[:4] == ["instance", "strategy", "optimum", "best"]
    assert "eil51" in out and "426" in out


def test_solve_writes_csv_and_json(tmp_path):
    csv_out, json_out = tmp_path / "r.csv", tmp_path / "r.json"
    args = ["solve", "berlin52", "--max-trials", "3", "--seed", "1"]
    assert main(args + ["--out", str(csv_out), "--format", "csv"]) == 0
    assert main(args + ["--out", str(json_out), "--format", "json"]) == 0
    a = parse_report(csv_out.read_text(), "csv")
    b = parse_report(json_out.read_text(), "json")
    assert [r.best for r in a] == [r.best for r in b]
    assert json.loads(json_out.read_text())[0]["instance"] == "berlin52"


def test_strategy_and_parameter_flags(tmp_path):
    out = tmp_path / "r.json"
    assert main(["solve", "eil51", "--strategy", "fixq", "--max-trials", "2", "--epsilon", "0.2",
                 "--beta", "0.9", "--lambda", "0.2", "--gamma", "0.8", "--max-num", "1",
                 "--no-stop-at-optimum", "--single-pass", "--time-limit", "5",
                 "--out", str(out), "--format", "json"]) == 0
    (row,) = json.loads(out.read_text())
    assert row["strategy"] == "fixq" and row["mean_trials"] <= 2


def test_tour_and_dump_outputs(tmp_path):
    tour, pen, cand = tmp_path / "t.tour", tmp_path / "p.csv", tmp_path / "c.csv"
    assert main(["solve", "eil51", "--max-trials", "3", "--tour-out", str(tour),
                 "--dump-penalties", str(pen), "--dump-candidates", str(cand),
                 "--out", str(tmp_path / "r.txt")]) == 0
    inst = load_instance("eil51")
    order = parse_tour(tour.read_text()).order.tolist()
    assert sorted(order) == list(range(51))
    assert tour_length(inst, order) >= 426
    assert pen.read_text().splitlines()[0] == "city,pi"
    assert len(pen.read_text().splitlines()) == 52
    assert len(cand.read_text().splitlines()) == 1 + 51 * 5


def test_unreadable_inputs_exit_nonzero(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "nope.tsp")]) == 2
    bad = tmp_path / "bad.tsp"
    bad.write_text("NAME: bad\nDIMENSION: x\n")
    assert main(["solve", str(bad)]) == 2
    assert main(["suite", str(tmp_path / "missing_dir")]) == 2
    assert main(["solve", "eil51", "--runs", "0"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["solve", "eil51", "--strategy", "bogus"])
    assert exc.value.code != 0
    assert "cannot read" in capsys.readouterr().err


def test_suite_over_a_list_file(tmp_path):
    (tmp_path / "local.tsp").write_text(serialize_instance(load_instance("eil51")))
    lst = tmp_path / "list.txt"
    lst.write_text("# mixed entries\nlocal.tsp\nberlin52\n\nmissing.tsp\n")
    out = tmp_path / "r.csv"
    rc = main(["suite", str(lst), "--strategies", "vsr,alpha", "--max-trials", "2",
               "--out", str(out), "--format", "csv"])
    reports = parse_report(out.read_text(), "csv")
    assert rc == 1  # the missing entry is reported
    assert [(r.instance, r.strategy) for r in reports] == [
        ("eil51", "vsr"), ("eil51", "alpha"), ("berlin52", "vsr"), ("berlin52", "alpha"),
        ("missing", "vsr"), ("missing", "alpha")]
    assert all(r.error is None for r in reports[:4])


def test_suite_over_a_directory(tmp_path):
    for name in ("eil51", "berlin52"):
        (tmp_path / f"{name}.tsp").write_text(serialize_instance(load_instance(name)))
    out = tmp_path / "r.json"
    assert main(["suite", str(tmp_path), "--max-trials", "2", "--out", str(out),
                 "--format", "json"]) == 0
    assert [r.instance for r in parse_report(out.read_text(), "json")] == ["berlin52", "eil51"]


def test_console_module_entry():
    proc = subprocess.run([sys.executable, "-m", "rlkopt.cli", "solve", "eil51", "--max-trials",
                           "1", "--format", "csv"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("instance,strategy")
