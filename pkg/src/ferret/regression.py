"""YAML-driven end-to-end regressions: build, run, evaluate, check, report.

A regression spec declares a corpus, index options, a list of runs (BM25,
dense flat/HNSW, or hybrid fusion of two earlier runs), and a list of
metric checks with expected values and tolerances. Input paths resolve
relative to the spec file; outputs resolve relative to the working
directory. The markdown report is deterministic: no timestamps, no
absolute paths, all randomness (HNSW seeds) echoed.

The schema is strict: unknown keys are errors, so typos fail loudly
instead of silently skipping a check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import dense_search, evalkit, hybrid, sparse_search
from .analysis import AnalyzerConfig, load_stopwords
from .errors import FileFormatError
from .results import Run
from .sparse_index import IndexBuildOptions, build_index, ingest

_MODELS = ("bm25", "dense-flat", "dense-hnsw", "hybrid")


@dataclass
class RunSpec:
    name: str
    model: str
    output: str
    k: int = 1000
    format: str = "trec"
    tag: str = "ferret"
    params: dict = field(default_factory=dict)
    topics: str | None = None
    topics_format: str = "tsv"
    vectors: str | None = None
    query_vectors: str | None = None
    metric: str = "inner_product"
    dense_run: str | None = None
    sparse_run: str | None = None


@dataclass
class CheckSpec:
    run: str
    qrels: str
    metric: str
    expected: float
    tolerance: float
    rel_threshold: int = 1


@dataclass
class RegressionSpec:
    name: str
    runs: list[RunSpec]
    checks: list[CheckSpec]
    corpus: str | None = None
    index: dict = field(default_factory=dict)
    report: str = "report.md"
    base_dir: Path = Path(".")


def _check_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise FileFormatError(f"{where}: expected a mapping")
    unknown = set(obj) - allowed
    if unknown:
        raise FileFormatError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise FileFormatError(f"{where}: missing required keys {sorted(missing)}")


_INDEX_KEYS = {
    "stemmer", "stopwords", "lowercase",
    "store_positions", "store_docvectors", "store_raw", "threads",
}
_RUN_KEYS = {
    "name", "model", "output", "k", "format", "tag", "params",
    "topics", "topics_format", "vectors", "query_vectors", "metric",
    "dense_run", "sparse_run",
}
_CHECK_KEYS = {"run", "qrels", "metric", "expected", "tolerance", "rel_threshold"}


def load_regression_spec(path: str | Path) -> RegressionSpec:
    """Parse and validate a spec file; all structural errors name the spot."""
    p = Path(path)
    try:
        raw = yaml.safe_load(p.read_text("utf-8"))
    except yaml.YAMLError as e:
        raise FileFormatError(f"{p}: invalid YAML: {e}") from e
    _check_keys(
        raw,
        {"name", "corpus", "index", "runs", "checks", "report"},
        {"name", "runs", "checks"},
        str(p),
    )
    if "index" in raw:
        _check_keys(raw["index"], _INDEX_KEYS, set(), f"{p}: index")
    runs = []
    names = set()
    for i, r in enumerate(raw["runs"] or []):
        where = f"{p}: runs[{i}]"
        _check_keys(r, _RUN_KEYS, {"name", "model", "output"}, where)
        spec = RunSpec(**r)
        if spec.model not in _MODELS:
            raise FileFormatError(f"{where}: unknown model {spec.model!r} (expected {_MODELS})")
        if spec.name in names:
            raise FileFormatError(f"{where}: duplicate run name {spec.name!r}")
        names.add(spec.name)
        if spec.model == "bm25" and not spec.topics:
            raise FileFormatError(f"{where}: bm25 runs need `topics`")
        if spec.model in ("dense-flat", "dense-hnsw") and not (
            spec.vectors and spec.query_vectors
        ):
            raise FileFormatError(f"{where}: dense runs need `vectors` and `query_vectors`")
        if spec.model == "hybrid":
            for key, ref in (("dense_run", spec.dense_run), ("sparse_run", spec.sparse_run)):
                if not ref:
                    raise FileFormatError(f"{where}: hybrid runs need `{key}`")
                if ref not in names - {spec.name}:
                    raise FileFormatError(f"{where}: {key} {ref!r} is not an earlier run")
            if "alpha" not in spec.params:
                raise FileFormatError(f"{where}: hybrid runs need params.alpha")
        runs.append(spec)
    if not runs:
        raise FileFormatError(f"{p}: no runs declared")
    checks = []
    for i, c in enumerate(raw["checks"] or []):
        where = f"{p}: checks[{i}]"
        _check_keys(c, _CHECK_KEYS, {"run", "qrels", "metric", "expected", "tolerance"}, where)
        spec = CheckSpec(**c)
        if spec.run not in names:
            raise FileFormatError(f"{where}: references undeclared run {spec.run!r}")
        if spec.tolerance < 0:
            raise FileFormatError(f"{where}: tolerance must be >= 0")
        evalkit.parse_metric(spec.metric)
        checks.append(spec)
    return RegressionSpec(
        name=raw["name"],
        corpus=raw.get("corpus"),
        index=raw.get("index", {}),
        runs=runs,
        checks=checks,
        report=raw.get("report", "report.md"),
        base_dir=p.parent,
    )


@dataclass
class CheckResult:
    check: CheckSpec
    observed: float

    @property
    def passed(self) -> bool:
        return abs(self.observed - self.check.expected) <= self.check.tolerance


@dataclass
class RegressionResult:
    spec: RegressionSpec
    results: list[CheckResult]
    report_path: Path
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(r.passed for r in self.results)


def _analyzer_from_spec(index_cfg: dict, base: Path) -> AnalyzerConfig:
    stem = index_cfg.get("stemmer", "porter")
    stop = index_cfg.get("stopwords", "default")
    lowercase = bool(index_cfg.get("lowercase", True))
    if stop == "default":
        return AnalyzerConfig(lowercase=lowercase, stem=stem)
    if stop == "none":
        return AnalyzerConfig(lowercase=lowercase, stopwords=frozenset(), stem=stem)
    return AnalyzerConfig(lowercase=lowercase, stopwords=load_stopwords(base / stop), stem=stem)


def _execute_runs(spec: RegressionSpec, workdir: Path) -> dict[str, Run]:
    """Build whatever the declared runs need and produce each run file."""
    base = spec.base_dir
    produced: dict[str, Run] = {}
    sparse_handle = None
    try:
        for r in spec.runs:
            if r.model == "bm25":
                if sparse_handle is None:
                    if not spec.corpus:
                        raise FileFormatError(f"run {r.name!r} needs a top-level corpus")
                    opts = IndexBuildOptions(
                        store_positions=bool(spec.index.get("store_positions", True)),
                        store_docvectors=bool(spec.index.get("store_docvectors", True)),
                        store_raw=bool(spec.index.get("store_raw", True)),
                        analyzer=_analyzer_from_spec(spec.index, base),
                        threads=int(spec.index.get("threads", 1)),
                    )
                    sparse_handle = build_index(
                        ingest(base / spec.corpus), opts, workdir / "index"
                    )
                topics = evalkit.load_topics(base / r.topics, r.topics_format)
                params = sparse_search.Bm25Params(**r.params) if r.params else None
                run = sparse_search.batch_search(
                    sparse_handle, topics, k=r.k, params=params, tag=r.tag
                )
            elif r.model in ("dense-flat", "dense-hnsw"):
                store = dense_search.load_vectors(base / r.vectors)
                queries = dense_search.load_query_vectors(base / r.query_vectors)
                if r.model == "dense-hnsw":
                    hp = dense_search.HnswParams(**{
                        k: int(v) for k, v in r.params.items()
                    })
                    target = dense_search.hnsw_build(store, hp, r.metric)
                else:
                    target = store
                run = dense_search.dense_batch_search(
                    target, queries, k=r.k, metric=r.metric, tag=r.tag
                )
            else:  # hybrid
                kwargs = dict(r.params)
                alpha = float(kwargs.pop("alpha"))
                kwargs.setdefault("k_candidates", r.k)
                hp = hybrid.HybridParams(alpha=alpha, k=r.k, **kwargs)
                run = hybrid.hybrid_batch(produced[r.dense_run], produced[r.sparse_run], hp, tag=r.tag)
            out = workdir / r.output
            out.parent.mkdir(parents=True, exist_ok=True)
            evalkit.write_run(run, out, r.format)
            produced[r.name] = run
    finally:
        if sparse_handle is not None:
            sparse_handle.close()
    return produced


def _fmt_params(r: RunSpec) -> str:
    parts = []
    if r.model == "bm25":
        p = sparse_search.Bm25Params(**r.params) if r.params else sparse_search.Bm25Params()
        parts.append(f"k1={p.k1:g}, b={p.b:g}")
    elif r.model == "dense-flat":
        parts.append(f"metric={r.metric}")
    elif r.model == "dense-hnsw":
        hp = dense_search.HnswParams(**{k: int(v) for k, v in r.params.items()})
        parts.append(
            f"metric={r.metric}, M={hp.M}, ef_construction={hp.ef_construction}, "
            f"ef_search={hp.ef_search}, seed={hp.seed}"
        )
    else:
        parts.append(f"alpha={float(r.params['alpha']):g}, "
                     f"dense={r.dense_run}, sparse={r.sparse_run}")
    return "; ".join(parts)


def _render_report(
    spec: RegressionSpec, results: list[CheckResult], error: str | None
) -> str:
    lines = [f"# Regression: {spec.name}", ""]
    lines.append("## Configuration")
    if spec.corpus:
        lines.append(f"- corpus: `{spec.corpus}`")
    if spec.index:
        opts = ", ".join(f"{k}={spec.index[k]}" for k in sorted(spec.index))
        lines.append(f"- index options: {opts}")
    for r in spec.runs:
        lines.append(f"- run `{r.name}`: model={r.model}, k={r.k}, {_fmt_params(r)}")
    lines.append("")
    lines.append("## Checks")
    lines.append("")
    lines.append("| check | run | metric | expected | observed | tolerance | status |")
    lines.append("|---|---|---|---|---|---|---|")
    for i, res in enumerate(results):
        c = res.check
        status = "PASS" if res.passed else "FAIL"
        lines.append(
            f"| {i + 1} | {c.run} | {c.metric} | {c.expected:.6f} "
            f"| {res.observed:.6f} | {c.tolerance:g} | {status} |"
        )
    lines.append("")
    if error is not None:
        lines.append(f"Aborted: {error}")
    else:
        npass = sum(1 for r in results if r.passed)
        verdict = "PASS" if npass == len(results) else "FAIL"
        lines.append(f"Overall: {verdict} ({npass}/{len(results)} checks)")
    lines.append("")
    return "\n".join(lines)


def run_regression(spec: RegressionSpec, workdir: str | Path) -> RegressionResult:
    """Execute the pipeline. A stage failure still writes a partial report
    (with the error recorded) before the result comes back."""
    wd = Path(workdir)
    wd.mkdir(parents=True, exist_ok=True)
    report_path = wd / spec.report
    results: list[CheckResult] = []
    error: str | None = None
    try:
        produced = _execute_runs(spec, wd)
        for c in spec.checks:
            qrels = evalkit.load_qrels(spec.base_dir / c.qrels)
            ev = evalkit.evaluate_run(produced[c.run], qrels, [c.metric], c.rel_threshold)
            results.append(CheckResult(check=c, observed=ev.values[c.metric]))
    except Exception as e:  # partial report must survive any stage failure
        error = str(e)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_render_report(spec, results, error))
    return RegressionResult(spec=spec, results=results, report_path=report_path, error=error)
