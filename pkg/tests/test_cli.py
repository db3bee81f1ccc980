"""End-to-end command tests: every command is exercised through main() and
compared against library calls and committed golden run files."""

import json
from pathlib import Path

import pytest

from ferret import __version__
from ferret.cli import _parse_grid, main
from ferret.evalkit import load_topics, write_run
from ferret.sparse_index import load_index
from ferret.sparse_search import Bm25Params, batch_search


def run_cli(capsys, *argv) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def sparse_index_dir(tmp_path, fixtures_dir, capsys):
    out = tmp_path / "sparse_idx"
    code, _, _ = run_cli(
        capsys, "index", "--input", str(fixtures_dir / "corpus.jsonl"), "--output", str(out)
    )
    assert code == 0
    return out


# ---------------------------------------------------------------------------
# Top-level parsing
# ---------------------------------------------------------------------------


def test_version_flag(capsys):
    code, out, _ = run_cli(capsys, "--version")
    assert code == 0
    assert out.strip() == f"ferret {__version__}"


def test_no_command_is_usage_error(capsys):
    code, _, err = run_cli(capsys)
    assert code == 1
    assert "usage:" in err


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run_cli(capsys, "eval", "--nope")
    assert code == 1
    assert "error" in err


# ---------------------------------------------------------------------------
# index
# ---------------------------------------------------------------------------


def test_index_sparse_fixture(sparse_index_dir, capsys):
    manifest = json.loads((sparse_index_dir / "manifest.json").read_text())
    assert manifest["stats"]["doc_count"] == 6
    with load_index(sparse_index_dir) as idx:
        assert idx.stats.doc_count == 6


def test_index_requires_an_input(tmp_path, capsys):
    code, _, err = run_cli(capsys, "index", "--output", str(tmp_path / "idx"))
    assert code == 1
    assert "--input" in err and "--vectors" in err


def test_index_missing_output_flag(capsys):
    code, _, err = run_cli(capsys, "index", "--input", "x")
    assert code == 1
    assert "usage:" in err


def test_index_missing_corpus_is_data_error(tmp_path, capsys):
    code, _, err = run_cli(
        capsys, "index", "--input", str(tmp_path / "nowhere"), "--output", str(tmp_path / "idx")
    )
    assert code == 2
    assert "error:" in err


def test_index_dense_flat(tmp_path, fixtures_dir, capsys):
    out = tmp_path / "dense_idx"
    code, stdout, _ = run_cli(
        capsys,
        "index", "--vectors", str(fixtures_dir / "vectors.jsonl"), "--output", str(out),
    )
    assert code == 0
    assert "6 vectors" in stdout
    assert json.loads((out / "manifest.json").read_text())["format"] == "ferret-dense-flat"


def test_index_hnsw_is_deterministic(tmp_path, fixtures_dir, capsys):
    outs = []
    for name in ("one", "two"):
        out = tmp_path / name
        code, _, _ = run_cli(
            capsys,
            "index", "--vectors", str(fixtures_dir / "vectors.jsonl"),
            "--type", "hnsw", "--M", "4", "--ef-construction", "8", "--seed", "42",
            "--output", str(out),
        )
        assert code == 0
        outs.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
    assert outs[0] == outs[1]
    assert "graph.bin" in outs[0]


# ---------------------------------------------------------------------------
# search: sparse
# ---------------------------------------------------------------------------


def search_sparse(capsys, index_dir, fixtures_dir, out_path, *extra):
    return run_cli(
        capsys,
        "search", "--index", str(index_dir), "--topics", str(fixtures_dir / "topics.tsv"),
        "--output", str(out_path), "--bm25", "--hits", "10", *extra,
    )


def test_search_sparse_matches_golden(sparse_index_dir, fixtures_dir, tmp_path, capsys):
    out = tmp_path / "run.trec"
    code, stdout, _ = search_sparse(capsys, sparse_index_dir, fixtures_dir, out)
    assert code == 0
    assert "3 queries" in stdout
    assert out.read_bytes() == (fixtures_dir / "golden_bm25.trec").read_bytes()


def test_search_sparse_equals_library_call(sparse_index_dir, fixtures_dir, tmp_path, capsys):
    cli_out = tmp_path / "cli.trec"
    assert search_sparse(capsys, sparse_index_dir, fixtures_dir, cli_out)[0] == 0
    lib_out = tmp_path / "lib.trec"
    with load_index(sparse_index_dir) as idx:
        topics = load_topics(fixtures_dir / "topics.tsv")
        run = batch_search(idx, topics, k=10, params=Bm25Params(0.9, 0.4))
        write_run(run, lib_out)
    assert cli_out.read_bytes() == lib_out.read_bytes()


def test_search_sparse_threads_byte_identical(sparse_index_dir, fixtures_dir, tmp_path, capsys):
    a, b = tmp_path / "t1.trec", tmp_path / "t8.trec"
    assert search_sparse(capsys, sparse_index_dir, fixtures_dir, a, "--threads", "1")[0] == 0
    assert search_sparse(capsys, sparse_index_dir, fixtures_dir, b, "--threads", "8")[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_search_msmarco_format(sparse_index_dir, fixtures_dir, tmp_path, capsys):
    out = tmp_path / "run.tsv"
    code, _, _ = search_sparse(capsys, sparse_index_dir, fixtures_dir, out, "--format", "msmarco")
    assert code == 0
    lines = out.read_text().splitlines()
    assert all(len(line.split("\t")) == 3 for line in lines)
    golden = (fixtures_dir / "golden_bm25.trec").read_text().splitlines()
    assert [tuple(l.split("\t")) for l in lines] == [
        (p[0], p[2], p[3]) for p in (l.split() for l in golden)
    ]


def test_search_sparse_needs_index_and_topics(tmp_path, capsys):
    code, _, err = run_cli(capsys, "search", "--output", str(tmp_path / "r.trec"))
    assert code == 1
    assert "sparse search needs" in err


def test_search_missing_index_is_data_error(tmp_path, fixtures_dir, capsys):
    code, _, _ = search_sparse(capsys, tmp_path / "no_idx", fixtures_dir, tmp_path / "r.trec")
    assert code == 2


def test_search_creates_missing_output_dirs(sparse_index_dir, fixtures_dir, tmp_path, capsys):
    out = tmp_path / "runs" / "nested" / "run.trec"
    code, _, _ = search_sparse(capsys, sparse_index_dir, fixtures_dir, out)
    assert code == 0
    assert out.is_file()


def test_search_unwritable_output_is_io_error(sparse_index_dir, fixtures_dir, tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("a regular file where a directory is needed")
    code, _, err = search_sparse(capsys, sparse_index_dir, fixtures_dir, blocker / "run.trec")
    assert code == 3
    assert "error:" in err


# ---------------------------------------------------------------------------
# search: dense and hybrid
# ---------------------------------------------------------------------------


def test_search_dense_flat_matches_golden(tmp_path, fixtures_dir, capsys):
    idx = tmp_path / "didx"
    assert run_cli(
        capsys, "index", "--vectors", str(fixtures_dir / "vectors.jsonl"), "--output", str(idx)
    )[0] == 0
    out = tmp_path / "run.trec"
    code, _, _ = run_cli(
        capsys,
        "search", "--index", str(idx), "--query-vectors", str(fixtures_dir / "queries.jsonl"),
        "--output", str(out), "--hits", "10",
    )
    assert code == 0
    assert out.read_bytes() == (fixtures_dir / "golden_dense_flat.trec").read_bytes()


def test_search_dense_hnsw_exhaustive_matches_flat_golden(tmp_path, fixtures_dir, capsys):
    # six vectors with default ef_search=128: the frontier covers the whole
    # graph, so the approximate result coincides with the exact one
    idx = tmp_path / "hidx"
    assert run_cli(
        capsys,
        "index", "--vectors", str(fixtures_dir / "vectors.jsonl"), "--type", "hnsw",
        "--output", str(idx),
    )[0] == 0
    out = tmp_path / "run.trec"
    code, _, _ = run_cli(
        capsys,
        "search", "--index", str(idx), "--query-vectors", str(fixtures_dir / "queries.jsonl"),
        "--output", str(out), "--hits", "10",
    )
    assert code == 0
    assert out.read_bytes() == (fixtures_dir / "golden_dense_flat.trec").read_bytes()


def test_search_dense_needs_index(tmp_path, fixtures_dir, capsys):
    code, _, err = run_cli(
        capsys,
        "search", "--query-vectors", str(fixtures_dir / "queries.jsonl"),
        "--output", str(tmp_path / "r.trec"),
    )
    assert code == 1
    assert "dense search needs --index" in err


def test_search_hybrid_matches_golden(tmp_path, fixtures_dir, capsys):
    out = tmp_path / "hybrid.trec"
    code, _, _ = run_cli(
        capsys,
        "search",
        "--dense-run", str(fixtures_dir / "golden_dense_flat.trec"),
        "--sparse-run", str(fixtures_dir / "golden_bm25.trec"),
        "--alpha", "0.5", "--hits", "10", "--output", str(out),
    )
    assert code == 0
    assert out.read_bytes() == (fixtures_dir / "golden_hybrid.trec").read_bytes()


def test_search_hybrid_requires_alpha(tmp_path, fixtures_dir, capsys):
    code, _, err = run_cli(
        capsys,
        "search",
        "--dense-run", str(fixtures_dir / "golden_dense_flat.trec"),
        "--sparse-run", str(fixtures_dir / "golden_bm25.trec"),
        "--output", str(tmp_path / "r.trec"),
    )
    assert code == 1
    assert "--alpha" in err


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def test_eval_fixture_run(fixtures_dir, capsys):
    code, out, _ = run_cli(
        capsys,
        "eval", "--qrels", str(fixtures_dir / "qrels.txt"),
        "--run", str(fixtures_dir / "golden_bm25.trec"),
    )
    assert code == 0
    assert out.splitlines() == [
        "mrr@10\t0.458333",
        "recall@1000\t0.500000",
        "map\t0.354167",
        "queries_evaluated\t4",
        "queries_skipped\t0",
    ]


def test_eval_three_query_hand_case(tmp_path, capsys):
    # ranks {1, 4, miss} -> MRR@10 = (1 + 0.25 + 0) / 3 = 0.416667
    run = tmp_path / "run.trec"
    run.write_text(
        "q1 Q0 r 1 3.000000 t\n"
        "q2 Q0 a 1 4.000000 t\nq2 Q0 b 2 3.000000 t\n"
        "q2 Q0 c 3 2.000000 t\nq2 Q0 r 4 1.000000 t\n"
        "q3 Q0 x 1 1.000000 t\n"
    )
    qrels = tmp_path / "qrels.txt"
    qrels.write_text("q1 0 r 1\nq2 0 r 1\nq3 0 r 1\n")
    code, out, _ = run_cli(
        capsys, "eval", "--qrels", str(qrels), "--run", str(run), "--metrics", "mrr@10"
    )
    assert code == 0
    assert "mrr@10\t0.416667" in out


def test_eval_unknown_metric_lists_supported(fixtures_dir, capsys):
    code, _, err = run_cli(
        capsys,
        "eval", "--qrels", str(fixtures_dir / "qrels.txt"),
        "--run", str(fixtures_dir / "golden_bm25.trec"), "--metrics", "ndcg@10",
    )
    assert code == 1
    assert "mrr@K, recall@K, map" in err


def test_eval_empty_metrics(fixtures_dir, capsys):
    code, _, err = run_cli(
        capsys,
        "eval", "--qrels", str(fixtures_dir / "qrels.txt"),
        "--run", str(fixtures_dir / "golden_bm25.trec"), "--metrics", " , ",
    )
    assert code == 1
    assert "no metrics" in err


def test_eval_repeated_output_stable(fixtures_dir, capsys):
    args = (
        "eval", "--qrels", str(fixtures_dir / "qrels.txt"),
        "--run", str(fixtures_dir / "golden_bm25.trec"),
    )
    first = run_cli(capsys, *args)
    second = run_cli(capsys, *args)
    assert first == second


# ---------------------------------------------------------------------------
# tune
# ---------------------------------------------------------------------------


def test_parse_grid_forms():
    assert _parse_grid("0.4", "b") == [0.4]
    assert _parse_grid("0.8:1.0:0.1", "k1") == [0.8, 0.9, 1.0]
    assert _parse_grid("0.2:0.2:0.1", "b") == [0.2]
    with pytest.raises(ValueError, match="bad k1 grid"):
        _parse_grid("1:2", "k1")
    with pytest.raises(ValueError, match="bad b grid"):
        _parse_grid("1:0:0.1", "b")
    with pytest.raises(ValueError, match="bad b grid"):
        _parse_grid("0:1:0", "b")


def test_tune_prints_table_and_best(sparse_index_dir, fixtures_dir, capsys):
    code, out, _ = run_cli(
        capsys,
        "tune", "--index", str(sparse_index_dir),
        "--topics", str(fixtures_dir / "topics.tsv"),
        "--qrels", str(fixtures_dir / "qrels.txt"),
        "--k1-grid", "0.9:1.2:0.3", "--b-grid", "0.4",
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("k1=0.9\tb=0.4\trecall@1000=")
    assert lines[1].startswith("k1=1.2\tb=0.4\trecall@1000=")
    # fixture metric ties across the grid, so the smaller k1 wins
    assert lines[-1] == "best\tk1=0.9\tb=0.4"


def test_tune_bad_grid_is_usage_error(sparse_index_dir, fixtures_dir, capsys):
    code, _, err = run_cli(
        capsys,
        "tune", "--index", str(sparse_index_dir),
        "--topics", str(fixtures_dir / "topics.tsv"),
        "--qrels", str(fixtures_dir / "qrels.txt"),
        "--k1-grid", "0.9:0.4", "--b-grid", "0.4",
    )
    assert code == 1
    assert "bad k1 grid" in err


# ---------------------------------------------------------------------------
# regress
# ---------------------------------------------------------------------------


def test_regress_fixture_suite_passes(tmp_path, fixtures_dir, capsys):
    code, out, err = run_cli(
        capsys,
        "regress", "--spec", str(fixtures_dir / "regress.yaml"), "--workdir", str(tmp_path),
    )
    assert code == 0, err
    assert "Overall: PASS (5/5 checks)" in out
    assert (tmp_path / "report.md").is_file()
    assert (tmp_path / "runs" / "bm25.trec").is_file()


def test_regress_report_regenerates_byte_identically(tmp_path, fixtures_dir, capsys):
    spec = str(fixtures_dir / "regress.yaml")
    assert run_cli(capsys, "regress", "--spec", spec, "--workdir", str(tmp_path))[0] == 0
    first = (tmp_path / "report.md").read_bytes()
    assert run_cli(capsys, "regress", "--spec", spec, "--workdir", str(tmp_path))[0] == 0
    assert (tmp_path / "report.md").read_bytes() == first


def test_regress_perturbed_expectation_fails_naming_check(tmp_path, fixtures_dir, capsys):
    # inputs resolve relative to the spec file, so stage them with the copy
    for name in ("corpus.jsonl", "topics.tsv", "vectors.jsonl", "queries.jsonl", "qrels.txt"):
        (tmp_path / name).write_bytes((fixtures_dir / name).read_bytes())
    spec_text = (fixtures_dir / "regress.yaml").read_text()
    assert "expected: 0.458333" in spec_text
    (tmp_path / "bad.yaml").write_text(spec_text.replace("expected: 0.458333", "expected: 0.9"))
    workdir = tmp_path / "work"
    code, out, _ = run_cli(
        capsys, "regress", "--spec", str(tmp_path / "bad.yaml"), "--workdir", str(workdir)
    )
    assert code == 2
    assert "FAIL" in out
    # the failing check row names its run and metric
    failing = [l for l in out.splitlines() if "FAIL" in l]
    assert any("bm25-default" in l and "mrr@10" in l for l in failing)
    report = (workdir / "report.md").read_text()
    assert "Overall: FAIL" in report


def test_regress_unknown_key_is_data_error(tmp_path, fixtures_dir, capsys):
    spec_text = (fixtures_dir / "regress.yaml").read_text()
    (tmp_path / "bad.yaml").write_text(spec_text + "\nbogus_key: 1\n")
    code, _, err = run_cli(
        capsys, "regress", "--spec", str(tmp_path / "bad.yaml"), "--workdir", str(tmp_path)
    )
    assert code == 2
    assert "bogus_key" in err


def test_regress_missing_spec_is_io_error(tmp_path, capsys):
    code, _, _ = run_cli(
        capsys, "regress", "--spec", str(tmp_path / "none.yaml"), "--workdir", str(tmp_path)
    )
    assert code == 3
