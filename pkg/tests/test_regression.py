"""Regression spec validation and pipeline behavior at library level."""

import pytest

from ferret.errors import FileFormatError
from ferret.regression import (
    CheckResult,
    CheckSpec,
    load_regression_spec,
    run_regression,
)

MINIMAL_SPEC = """\
name: tiny
corpus: c.jsonl
runs:
  - name: r1
    model: bm25
    topics: t.tsv
    k: 5
    output: runs/r1.trec
checks:
  - {run: r1, qrels: q.txt, metric: mrr@10, expected: 1.0, tolerance: 0.0}
"""


def write_spec(tmp_path, text: str, stage_inputs: bool = True):
    if stage_inputs:
        (tmp_path / "c.jsonl").write_text(
            '{"id": "d1", "contents": "lobster rolls"}\n'
            '{"id": "d2", "contents": "tomato soup"}\n'
        )
        (tmp_path / "t.tsv").write_text("q1\tlobster\n")
        (tmp_path / "q.txt").write_text("q1 0 d1 1\n")
    p = tmp_path / "spec.yaml"
    p.write_text(text)
    return p


def test_load_fixture_spec(fixtures_dir):
    spec = load_regression_spec(fixtures_dir / "regress.yaml")
    assert spec.name == "fixture-suite"
    assert [r.name for r in spec.runs] == ["bm25-default", "dense-flat", "dense-hnsw", "hybrid"]
    assert [r.model for r in spec.runs] == ["bm25", "dense-flat", "dense-hnsw", "hybrid"]
    assert len(spec.checks) == 5
    assert spec.base_dir == fixtures_dir
    assert spec.report == "report.md"


def test_minimal_spec_runs_and_passes(tmp_path):
    spec = load_regression_spec(write_spec(tmp_path, MINIMAL_SPEC))
    result = run_regression(spec, tmp_path / "work")
    assert result.error is None
    assert result.passed
    assert [r.observed for r in result.results] == [1.0]
    assert (tmp_path / "work" / "runs" / "r1.trec").is_file()
    report = result.report_path.read_text()
    assert "Overall: PASS (1/1 checks)" in report
    assert "k1=0.9, b=0.4" in report  # defaults echoed for replicability


def test_invalid_yaml(tmp_path):
    p = write_spec(tmp_path, "name: [unclosed", stage_inputs=False)
    with pytest.raises(FileFormatError, match="invalid YAML"):
        load_regression_spec(p)


@pytest.mark.parametrize(
    "mutation,message",
    [
        (("name: tiny", "name: tiny\nextra: 1"), r"unknown keys \['extra'\]"),
        (("model: bm25", "model: bm42"), "unknown model 'bm42'"),
        (("    topics: t.tsv\n", ""), "bm25 runs need `topics`"),
        (("run: r1,", "run: ghost,"), "undeclared run 'ghost'"),
        (("tolerance: 0.0", "tolerance: -0.1"), "tolerance must be >= 0"),
        (("  - name: r1", "  - nome: r1\n    name: r1"), r"runs\[0\].*unknown keys"),
    ],
)
def test_spec_validation_errors(tmp_path, mutation, message):
    old, new = mutation
    assert old in MINIMAL_SPEC
    p = write_spec(tmp_path, MINIMAL_SPEC.replace(old, new), stage_inputs=False)
    with pytest.raises(FileFormatError, match=message):
        load_regression_spec(p)


def test_spec_rejects_duplicate_run_names(tmp_path):
    text = MINIMAL_SPEC.replace(
        "checks:",
        "  - name: r1\n    model: bm25\n    topics: t.tsv\n    output: runs/dup.trec\nchecks:",
    )
    with pytest.raises(FileFormatError, match="duplicate run name 'r1'"):
        load_regression_spec(write_spec(tmp_path, text, stage_inputs=False))


def test_spec_rejects_empty_runs(tmp_path):
    text = "name: x\nruns: []\nchecks: []\n"
    with pytest.raises(FileFormatError, match="no runs declared"):
        load_regression_spec(write_spec(tmp_path, text, stage_inputs=False))


def test_spec_rejects_bad_check_metric(tmp_path):
    text = MINIMAL_SPEC.replace("metric: mrr@10", "metric: ndcg@10")
    with pytest.raises(ValueError, match="unknown metric"):
        load_regression_spec(write_spec(tmp_path, text, stage_inputs=False))


def test_dense_run_requires_vector_files(tmp_path):
    text = MINIMAL_SPEC.replace("model: bm25\n    topics: t.tsv", "model: dense-flat")
    with pytest.raises(FileFormatError, match="dense runs need"):
        load_regression_spec(write_spec(tmp_path, text, stage_inputs=False))


HYBRID_TAIL = """\
  - name: fused
    model: hybrid
    dense_run: {dense}
    sparse_run: r1
    params: {{{params}}}
    output: runs/fused.trec
checks: []
"""


def hybrid_spec(dense="r1", params="alpha: 0.5") -> str:
    # r1 stands in for both inputs; referencing works off run names only
    return MINIMAL_SPEC.split("checks:")[0] + HYBRID_TAIL.format(dense=dense, params=params)


def test_hybrid_must_reference_earlier_runs(tmp_path):
    with pytest.raises(FileFormatError, match="'fused' is not an earlier run"):
        load_regression_spec(write_spec(tmp_path, hybrid_spec(dense="fused"), stage_inputs=False))
    with pytest.raises(FileFormatError, match="hybrid runs need params.alpha"):
        load_regression_spec(write_spec(tmp_path, hybrid_spec(params="k_candidates: 5"),
                                        stage_inputs=False))


def test_check_result_tolerance_is_inclusive():
    # powers of two keep |observed - expected| exact, so the boundary is testable
    check = CheckSpec(run="r", qrels="q", metric="map", expected=0.5, tolerance=0.25)
    assert CheckResult(check, observed=0.75).passed
    assert CheckResult(check, observed=0.25).passed
    assert not CheckResult(check, observed=0.750001).passed


def test_failed_stage_still_writes_partial_report(tmp_path):
    text = MINIMAL_SPEC.replace("corpus: c.jsonl", "corpus: missing.jsonl")
    spec = load_regression_spec(write_spec(tmp_path, text))
    result = run_regression(spec, tmp_path / "work")
    assert result.error is not None and "missing.jsonl" in result.error
    assert not result.passed
    assert result.results == []
    report = result.report_path.read_text()
    assert "Aborted: " in report and "missing.jsonl" in report


def test_failed_check_recorded_not_raised(tmp_path):
    text = MINIMAL_SPEC.replace("expected: 1.0", "expected: 0.25")
    spec = load_regression_spec(write_spec(tmp_path, text))
    result = run_regression(spec, tmp_path / "work")
    assert result.error is None
    assert not result.passed
    assert "Overall: FAIL (0/1 checks)" in result.report_path.read_text()
