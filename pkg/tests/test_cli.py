import csv
import io
import json

import pytest
from click.testing import CliRunner

from nlbi.cli import main
from nlbi.distributions import load_dataset


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    assert runner.invoke(main, ["gen", "--n-dists", "300", "--bins", "16", "--clusters", "5",
                                "--seed", "1", "-o", str(d / "data.tsv")]).exit_code == 0
    assert runner.invoke(main, ["gen", "--n-dists", "8", "--bins", "16", "--clusters", "5",
                                "--seed", "2", "-o", str(d / "q.tsv")]).exit_code == 0
    res = runner.invoke(main, ["build", str(d / "data.tsv"), "-o", str(d / "idx.nlbi")])
    assert res.exit_code == 0, res.output
    return d


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_gen_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run("gen", "--n-dists", 100, "--bins", 16, "--dim", 2, "--seed", 1,
                   "-o", tmp_path / name).exit_code == 0
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_gen_usage_errors(tmp_path):
    assert run("gen", "--n-dists", 0, "-o", tmp_path / "x").exit_code == 2
    assert run("gen", "--n-dists", 5, "--shapes", "square", "-o", tmp_path / "x").exit_code == 2


def test_gen_clusters_round_trip(tmp_path):
    path = tmp_path / "c.tsv"
    assert run("gen", "--clusters", 10, "--n-dists", 1000, "-o", path).exit_code == 0
    assert len(load_dataset(path)) == 1000


def test_build_reports_table_size_and_is_deterministic(workdir):
    res = run("build", workdir / "data.tsv", "-o", workdir / "again.nlbi")
    assert res.exit_code == 0
    assert "summary table:" in res.output
    assert (workdir / "again.nlbi").read_bytes() == (workdir / "idx.nlbi").read_bytes()


def test_build_errors(workdir, tmp_path):
    assert run("build", workdir / "data.tsv", "-o", tmp_path / "x", "--projections", 3).exit_code == 2
    bad = tmp_path / "bad.tsv"
    bad.write_text("0\t1\t1\t0\t0.5\n")
    res = run("build", bad, "-o", tmp_path / "x")
    assert res.exit_code == 2 and "line 1" in res.output
    assert run("build", bad, "-o", tmp_path / "x", "--renormalize").exit_code == 0
    assert run("build", tmp_path / "missing.tsv", "-o", tmp_path / "x").exit_code == 2


def test_query_with_oracle(workdir, tmp_path):
    out = tmp_path / "r.txt"
    stats = tmp_path / "s.json"
    res = run("query", workdir / "idx.nlbi", workdir / "q.tsv", "--k", 4, "--oracle",
              "-o", out, "--stats", stats)
    assert res.exit_code == 0, res.output
    lines = out.read_text().splitlines()
    assert len(lines) == 8 * 4
    qid, rank, oid, dist = lines[0].split("\t")
    assert (qid, rank) == ("0", "1") and float(dist) >= 0
    doc = json.loads(stats.read_text())
    assert len(doc["queries"]) == 8 and "mean_exact_emds" in doc["report"]


def test_query_is_repeatable_and_thread_invariant(workdir, tmp_path):
    outs = []
    for threads in (1, 1, 4):
        out = tmp_path / f"r{len(outs)}.txt"
        assert run("query", workdir / "idx.nlbi", workdir / "q.tsv", "--k", 3,
                   "--threads", threads, "-o", out).exit_code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_query_errors(workdir, tmp_path):
    assert run("query", workdir / "idx.nlbi", workdir / "q.tsv", "--k", 301).exit_code == 2
    assert run("query", tmp_path / "none.nlbi", workdir / "q.tsv").exit_code == 2
    three_d = tmp_path / "q3.tsv"
    three_d.write_text("0\t3\t1\t0,0,0\t1\n")
    assert run("query", workdir / "idx.nlbi", three_d).exit_code == 2


def test_bench_sweeps(workdir, tmp_path):
    out = tmp_path / "b.csv"
    res = run("bench", workdir / "idx.nlbi", workdir / "q.tsv", "--k", "1,4",
              "--sub-intervals", "1,3,9", "--node-capacity", "100,400", "-o", out)
    assert res.exit_code == 0, res.output
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 2 * 3 * 2
    by = {(int(r["k"]), int(r["sub_intervals"]), int(r["node_capacity"])): r for r in rows}
    for k in (1, 4):
        for s in (1, 3, 9):
            assert by[k, s, 100]["results_sha256"] == by[k, s, 400]["results_sha256"]
        surv = [float(by[k, s, 100]["mean_index_survivors"]) for s in (1, 3, 9)]
        assert surv == sorted(surv, reverse=True)
    assert run("bench", workdir / "idx.nlbi", workdir / "q.tsv", "--k", "0").exit_code == 2


def test_verify(workdir, tmp_path):
    res = run("verify", workdir / "idx.nlbi", "--pairs", 30)
    assert res.exit_code == 0, res.output
    assert "[PASS] summary table size" in res.output
    broken = tmp_path / "broken.nlbi"
    raw = bytearray((workdir / "idx.nlbi").read_bytes())
    raw[100] ^= 1
    broken.write_bytes(bytes(raw))
    assert run("verify", broken).exit_code == 1
    assert run("verify", tmp_path / "missing.nlbi").exit_code == 2


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "nlbi", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "verify" in res.stdout
