import csv

import pytest

from mmsr.archive import ArchiveRow, read_archive, to_row, to_solution, write_archive
from mmsr.cli import compute_metrics, main
from mmsr.evaluator import Evaluator
from mmsr.instances import ParseError, load_instance, sample_scenarios
from mmsr.search import Budget, StmlsConfig, stmls


@pytest.fixture
def inst_path(tmp_path):
    p = tmp_path / "inst.mmsr"
    assert main(["generate", "--vehicles", "12", "--seed", "7", "--out", str(p), "--fmax", "1",
                 "--lam", "2", "--highrisk-ratio", "0.2,0.3"]) == 0
    return p


def test_generate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.mmsr", tmp_path / "b.mmsr"
    assert main(["generate", "--vehicles", "20", "--seed", "7", "--out", str(a)]) == 0
    assert main(["generate", "--vehicles", "20", "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_generate_default_fmax(tmp_path):
    p = tmp_path / "b.mmsr"
    main(["generate", "--vehicles", "200", "--seed", "1", "--out", str(p)])
    assert "fmax 10\n" in p.read_text()


def test_generate_several_seeds(tmp_path):
    pattern = str(tmp_path / "i{seed}.mmsr")
    assert main(["generate", "--vehicles", "15", "--seed", "1,2", "--out", pattern]) == 0
    assert (tmp_path / "i1.mmsr").exists() and (tmp_path / "i2.mmsr").exists()
    assert main(["generate", "--vehicles", "15", "--seed", "1,2", "--out",
                 str(tmp_path / "x.mmsr")]) == 2


def test_usage_errors_exit_2(tmp_path, inst_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--vehicles", "20", "--seed", "7"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--instance", str(inst_path), "--algo", "tabu", "--out", "x.csv"])
    assert exc.value.code == 2
    assert main(["solve", "--instance", str(inst_path), "--algo", "stmls", "--sample-n", "0",
                 "--out", str(tmp_path / "a.csv")]) == 2
    assert main(["metrics", "--archives", str(tmp_path / "none*.csv"),
                 "--out", str(tmp_path / "m")]) == 2
    capsys.readouterr()


def test_io_errors_exit_1(tmp_path, capsys):
    assert main(["solve", "--instance", str(tmp_path / "missing.mmsr"), "--algo", "stmls",
                 "--out", str(tmp_path / "a.csv")]) == 1
    bad = tmp_path / "bad.mmsr"
    bad.write_text("MMSR v1\ncycle 97.0\n")
    assert main(["solve", "--instance", str(bad), "--algo", "stmls",
                 "--out", str(tmp_path / "a.csv")]) == 1
    assert "lambda" in capsys.readouterr().err


def _solve(inst_path, out, algo, seeds="3", budget="800it"):
    return main(["solve", "--instance", str(inst_path), "--algo", algo, "--sample-n", "5",
                 "--budget", budget, "--seed", seeds, "--out", str(out)])


def test_solve_is_deterministic(tmp_path, inst_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert _solve(inst_path, a, "stmls") == 0
    assert _solve(inst_path, b, "stmls") == 0
    assert a.read_bytes() == b.read_bytes()


def test_onescenario_archive_is_one_row(tmp_path, inst_path):
    out = tmp_path / "o.csv"
    assert _solve(inst_path, out, "onescenario") == 0
    (row,) = read_archive(out)
    assert row.re == 0 and row.algo == "onescenario"


def test_archive_solutions_re_evaluate(tmp_path, inst_path):
    out = tmp_path / "s.csv"
    _solve(inst_path, out, "lsnsga2", seeds="0,1")
    inst = load_instance(inst_path)
    sample = sample_scenarios(inst, 5, 0)
    rows = read_archive(out)
    assert {r.run for r in rows} == {0, 1}
    for r in rows:
        sol = to_solution(r, inst)
        Evaluator(inst, sample.scenarios).evaluate(sol)
        assert round(sol.obj_wo, 1) == r.wo
        assert sol.obj_re == pytest.approx(r.re, rel=1e-5)
        assert sol.violation_degree == 0


def test_archive_round_trip(tmp_path, inst_path):
    inst = load_instance(inst_path)
    sample = sample_scenarios(inst, 4, 2)
    sols = stmls(inst, sample, StmlsConfig(budget=Budget(500, "it")))
    rows = [to_row("inst", "stmls", 0, s, inst) for s in sols]
    write_archive(rows, tmp_path / "a.csv")
    back = read_archive(tmp_path / "a.csv")
    assert [(r.first_stage, r.plans) for r in back] == [(r.first_stage, r.plans) for r in rows]
    write_archive(back, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_bad_archive_is_a_parse_error(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("instance,algo,run,wo,re,first_stage,plans\ni,a,zero,1.0,0,1 2,\n")
    with pytest.raises(ParseError):
        read_archive(p)
    p.write_text("a,b\n")
    with pytest.raises(ParseError):
        read_archive(p)


def _row(algo, wo, re, run=0):
    return ArchiveRow("i", algo, run, wo, re, [1], [])


def test_single_archive_css_is_one():
    _, tables, _ = compute_metrics([_row("a", 1, 2), _row("a", 2, 1)], [0.5])
    (inst, labels, matrix), = tables
    assert labels == ["a"] and matrix == [[1.0]]


def test_dominating_archive_css():
    rows = [_row("A", 1, 1), _row("A", 2, 0), _row("B", 3, 3), _row("B", 4, 2)]
    metric_rows, tables, surfaces = compute_metrics(rows, [0.5, 1.0])
    (_, labels, matrix), = tables
    assert labels == ["A", "B"]
    assert matrix == [[1.0, 1.0], [0.0, 1.0]]
    assert len(metric_rows) == 2 and len(surfaces) == 4


def test_metrics_and_simulate_outputs(tmp_path, inst_path):
    _solve(inst_path, tmp_path / "arch_s.csv", "stmls")
    _solve(inst_path, tmp_path / "arch_o.csv", "onescenario")
    out = tmp_path / "m"
    assert main(["metrics", "--archives", str(tmp_path / "arch_*.csv"), "--out", str(out)]) == 0
    with open(out / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["algorithm"] for r in rows} == {"stmls", "onescenario"}
    assert (out / "css_inst.csv").exists() and (out / "eaf.csv").exists()

    sims = []
    for k in range(2):
        p = tmp_path / f"sim{k}.csv"
        assert main(["simulate", "--instance", str(inst_path), "--archives",
                     str(tmp_path / "arch_*.csv"), "--test-n", "4", "--out", str(p)]) == 0
        sims.append(p.read_bytes())
    assert sims[0] == sims[1]
    lines = sims[0].decode().splitlines()
    assert lines[0] == "variant,threshold,mean_obj_wo,mean_obj_re"
    assert [ln.split(",")[1] for ln in lines[1:7]] == ["0.0", "3.0", "5.0", "10.0", "15.0", "30.0"]
    assert lines[1].startswith("one-scenario") and lines[-1].startswith("FFR")
