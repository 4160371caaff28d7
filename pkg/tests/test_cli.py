import csv
import io
import json
import subprocess
import sys

import pytest

from dpcert.cli import EXIT_OK, EXIT_REJECT, EXIT_SATISFIABLE, EXIT_TIMEOUT, EXIT_USAGE, binomial_interval, main
from dpcert.formula import parse_dimacs


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


@pytest.fixture
def php2(tmp_path, capsys):
    assert main(["gen", "php", "2"]) == EXIT_OK
    return write(tmp_path, "php2.cnf", capsys.readouterr().out)


def lines(capsys):
    return capsys.readouterr().out.splitlines()


def test_solve_unsat(php2, capsys):
    assert main(["solve", php2]) == EXIT_OK
    out = lines(capsys)
    assert out[0] == "UNSATISFIABLE"
    assert "rounds: 21" in out


def test_solve_sat_and_empty_clause(tmp_path, capsys):
    assert main(["solve", write(tmp_path, "u.cnf", "p cnf 1 1\n1 0\n")]) == EXIT_OK
    assert lines(capsys)[0] == "SATISFIABLE"
    assert main(["solve", write(tmp_path, "e.cnf", "p cnf 1 2\n0\n1 0\n")]) == EXIT_OK
    out = lines(capsys)
    assert out[0] == "UNSATISFIABLE" and out[1].startswith("rounds: 0")


def test_solve_trace_output(worked_cnf, capsys):
    assert main(["solve", worked_cnf, "--trace"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "clauses: 6 6 4 4 3 2 1" in out
    assert "step 6 R 3\n2 x\n" in out


def test_parse_error_and_missing_file(tmp_path, capsys):
    assert main(["solve", write(tmp_path, "bad.cnf", "p cnf 2 1\n1 a 0\n")]) == EXIT_USAGE
    assert "bad.cnf" in capsys.readouterr().err
    assert main(["solve", str(tmp_path / "nope.cnf")]) == EXIT_USAGE


def test_usage_errors(worked_cnf):
    for argv in (["certify", worked_cnf, "--prime-bits", "7"], ["certify", worked_cnf, "--repetitions", "0"],
                 ["solve"], ["frobnicate"]):
        with pytest.raises(SystemExit) as err:
            main(argv)
        assert err.value.code == EXIT_USAGE
    assert main(["certify", worked_cnf, "--adversary", "nonsense"]) == EXIT_USAGE
    assert main(["certify", worked_cnf, "--prime", "15871"]) == EXIT_USAGE
    assert main(["certify", worked_cnf, "--transport", "socket"]) == EXIT_USAGE


def test_certify_worked_example(worked_cnf, capsys):
    assert main(["certify", worked_cnf, "--order", "lexi"]) == EXIT_OK
    out = lines(capsys)
    assert out[0].startswith("run 1: accept q=")
    assert "rounds=6 p2v_bytes=403 v2p_bytes=107" in out[0]
    assert out[1] == "ACCEPT"


def test_certify_tamper_rejects(worked_cnf, capsys):
    assert main(["certify", worked_cnf, "--adversary", "tamper:3:3:1"]) == EXIT_REJECT
    assert "REJECT (consistency)" in lines(capsys)


def test_certify_repetitions(php2, capsys):
    assert main(["certify", php2, "--repetitions", "3"]) == EXIT_OK
    out = lines(capsys)
    assert [l.split(":")[1].split()[0] for l in out[:3]] == ["accept"] * 3
    assert out[3] == "ACCEPT"


def test_certify_satisfiable(tmp_path, capsys):
    assert main(["certify", write(tmp_path, "s.cnf", "p cnf 2 1\n1 2 0\n")]) == EXIT_SATISFIABLE
    assert "nothing to certify" in capsys.readouterr().out


def test_certify_timeout(tmp_path, capsys):
    main(["gen", "php", "5"])
    path = write(tmp_path, "php5.cnf", capsys.readouterr().out)
    assert main(["certify", path, "--order", "lexi", "--timeout", "0"]) == EXIT_TIMEOUT


def test_certify_is_byte_identical(worked_cnf, tmp_path, capsys):
    outs = []
    for i in range(2):
        t = tmp_path / f"t{i}.jsonl"
        assert main(["certify", worked_cnf, "--seed-prover", "5", "--seed-verifier", "6", "--transcript", str(t)]) == 0
        outs.append((capsys.readouterr().out, t.read_bytes()))
    assert outs[0] == outs[1]
    records = [json.loads(l) for l in outs[0][1].decode().splitlines()]
    assert [r["tag"] for r in records[:3]] == ["HEADER", "INITIAL_ASSIGNMENT", "ROUND_POLY"]
    assert records[-1]["tag"] == "VERDICT"


def test_certify_stream_matches_inproc(worked_cnf, tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["certify", worked_cnf, "--transcript", str(a)]) == EXIT_OK
    first = capsys.readouterr().out
    assert main(["certify", worked_cnf, "--transport", "stream", "--transcript", str(b)]) == EXIT_OK
    assert capsys.readouterr().out == first
    assert a.read_bytes() == b.read_bytes()


def test_certify_over_socket(worked_cnf, capsys):
    server = subprocess.Popen(
        [sys.executable, "-m", "dpcert", "serve-verifier", worked_cnf, "--listen", "127.0.0.1:0"],
        stderr=subprocess.PIPE, text=True)
    try:
        banner = server.stderr.readline()
        assert banner.startswith("listening on ")
        address = banner.split()[-1]
        assert main(["certify", worked_cnf, "--transport", "socket", "--connect", address]) == EXIT_OK
        assert "ACCEPT" in lines(capsys)
        assert server.wait(30) == EXIT_OK
    finally:
        server.kill()
        server.stderr.close()


def test_emit_proofs(worked_cnf, tmp_path, capsys):
    out = tmp_path / "proofs"
    assert main(["certify", worked_cnf, "--emit-proofs", str(out)]) == EXIT_OK
    assert (out / "worked.res").read_text().startswith("c resolution trace")
    assert (out / "worked.drat").read_text().endswith("0\n")


@pytest.mark.parametrize("strategy, expect", [("honest", "accepted: 200"), ("degree:4", "accepted: 0")])
def test_attack_extremes(worked_cnf, capsys, strategy, expect):
    assert main(["attack", worked_cnf, "--strategy", strategy, "--trials", "200", "--prime", "101"]) == EXIT_OK
    out = lines(capsys)
    assert expect in out
    assert "q: 101" in out
    if strategy == "degree:4":
        assert "outcomes: shape=200" in out


def test_attack_tamper_report(worked_cnf, capsys):
    argv = ["attack", worked_cnf, "--strategy", "tamper:3", "--trials", "300", "--prime", "101"]
    assert main(argv) == EXIT_OK
    first = capsys.readouterr().out
    assert main(argv) == EXIT_OK
    assert capsys.readouterr().out == first
    report = dict(l.split(": ", 1) for l in first.splitlines())
    assert float(report["rate"]) <= 6 / 101 + 3 * float(report["sigma"]) + 1e-9
    assert float(report["bound_round d/q"]) == pytest.approx(6 / 101, abs=1e-6)
    assert float(report["bound_total dk/q"]) == pytest.approx(36 / 101, abs=1e-6)


def test_attack_on_satisfiable(tmp_path, capsys):
    assert main(["attack", write(tmp_path, "s.cnf", "p cnf 1 1\n1 0\n")]) == EXIT_SATISFIABLE


def test_binomial_interval():
    rate, sigma, upper = binomial_interval(0, 100)
    assert rate == 0 and sigma == 0 and 0 < upper < 0.1
    rate, sigma, upper = binomial_interval(50, 100)
    assert rate == 0.5 and sigma == pytest.approx(0.05) and upper > 0.6


def test_gen_outputs_parse(capsys):
    assert main(["gen", "random", "10", "--seed", "4"]) == EXIT_OK
    phi, n = parse_dimacs(capsys.readouterr().out)
    assert n == 10 and phi.num_clauses == 43
    assert main(["gen", "php", "3"]) == EXIT_OK
    phi, n = parse_dimacs(capsys.readouterr().out)
    assert n == 12 and phi.num_clauses == 22


def test_bench_csv(php2, tmp_path, capsys):
    out = tmp_path / "rows.csv"
    assert main(["bench", php2, "--orders", "lexi,greedy,unit,random", "--out", str(out),
                 "--emit-proofs", str(tmp_path / "p")]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [r["policy"] for r in rows] == ["lexi", "greedy", "unit", "random"]
    assert {r["verdict"] for r in rows} == {"accept"}
    assert "solved: lexi=1 greedy=1 unit=1 random=1" in capsys.readouterr().err
    assert len(list((tmp_path / "p").iterdir())) == 8
    assert main(["bench", php2, "--orders", "sideways"]) == EXIT_USAGE


def test_bench_default_corpus_to_stdout(capsys):
    assert main(["bench", "--max-holes", "2", "--orders", "lexi", "--prime-bits", "20"]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["instance"] for r in rows][:2] == ["php1", "php2"]
    assert len(rows) == 5


def test_module_entry_point(worked_cnf):
    proc = subprocess.run([sys.executable, "-m", "dpcert", "solve", worked_cnf], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("UNSATISFIABLE")
