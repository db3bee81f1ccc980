"""Command-line surface: index, search, eval, tune, regress.

Every command is a thin adapter over the library modules: the same
artifacts are reachable through direct calls, and tests assert that.

Exit codes: 0 success (and all regression checks passing), 1 usage errors
(bad flags, unknown metrics, malformed grids), 2 data errors (collection,
index, or file-format problems), 3 I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__, dense_search, evalkit, hybrid, regression, sparse_search
from .analysis import AnalyzerConfig, load_stopwords
from .errors import FerretError
from .sparse_index import IndexBuildOptions, build_index, ingest, load_index


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the documented code is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _analyzer_from_args(args) -> AnalyzerConfig:
    if args.stopwords == "default":
        stopwords = None
    elif args.stopwords == "none":
        stopwords = frozenset()
    else:
        stopwords = load_stopwords(args.stopwords)
    if stopwords is None:
        return AnalyzerConfig(stem=args.stemmer)
    return AnalyzerConfig(stopwords=stopwords, stem=args.stemmer)


def cmd_index(args) -> int:
    if args.vectors:
        store = dense_search.load_vectors(args.vectors)
        if args.type == "hnsw":
            params = dense_search.HnswParams(
                M=args.M, ef_construction=args.ef_construction,
                ef_search=args.ef_search, seed=args.seed,
            )
            target = dense_search.hnsw_build(store, params, args.metric)
        else:
            target = store
        dense_search.save_dense_index(target, args.output, args.metric)
        print(f"indexed {store.count} vectors (dim={store.dim}, type={args.type}) -> {args.output}")
        return 0
    opts = IndexBuildOptions(
        store_positions=args.store_positions,
        store_docvectors=args.store_docvectors,
        store_raw=args.store_raw,
        analyzer=_analyzer_from_args(args),
        threads=args.threads,
    )
    handle = build_index(ingest(args.input), opts, args.output)
    try:
        print(
            f"indexed {handle.stats.doc_count} documents, "
            f"{handle.term_count()} terms -> {args.output}"
        )
    finally:
        handle.close()
    return 0


def cmd_search(args) -> int:
    if args.dense_run or args.sparse_run:
        if not (args.dense_run and args.sparse_run and args.alpha is not None):
            raise ValueError("hybrid search needs --dense-run, --sparse-run, and --alpha")
        dense_run = evalkit.read_run(args.dense_run, args.run_format)
        sparse_run = evalkit.read_run(args.sparse_run, args.run_format)
        params = hybrid.HybridParams(alpha=args.alpha, k=args.hits, k_candidates=args.hits)
        run = hybrid.hybrid_batch(dense_run, sparse_run, params, tag=args.tag)
    elif args.query_vectors:
        if not args.index:
            raise ValueError("dense search needs --index (a dense index directory)")
        target = dense_search.load_dense_index(args.index)
        queries = dense_search.load_query_vectors(args.query_vectors)
        run = dense_search.dense_batch_search(
            target, queries, k=args.hits, threads=args.threads,
            metric=args.metric, ef_search=args.ef_search, tag=args.tag,
        )
    else:
        if not (args.index and args.topics):
            raise ValueError("sparse search needs --index and --topics")
        handle = load_index(args.index)
        try:
            topics = evalkit.load_topics(args.topics, args.topics_format)
            params = sparse_search.Bm25Params(k1=args.k1, b=args.b)
            run = sparse_search.batch_search(
                handle, topics, k=args.hits, params=params,
                threads=args.threads, tag=args.tag,
            )
        finally:
            handle.close()
    evalkit.write_run(run, args.output, args.format)
    nhits = sum(len(rl) for rl in run.lists.values())
    print(f"wrote {nhits} hits for {len(run.lists)} queries -> {args.output}")
    return 0


def cmd_eval(args) -> int:
    qrels = evalkit.load_qrels(args.qrels)
    run = evalkit.read_run(args.run, args.format)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    if not metrics:
        raise ValueError("no metrics given")
    result = evalkit.evaluate_run(run, qrels, metrics, args.rel_threshold)
    for name in metrics:
        print(f"{name}\t{result.values[name]:.6f}")
    print(f"queries_evaluated\t{result.queries_evaluated}")
    print(f"queries_skipped\t{result.queries_skipped}")
    return 0


def _parse_grid(spec: str, name: str) -> list[float]:
    """`a:b:step` inclusive, or a single value. Values rounded to 1e-10 to
    keep the printed grid free of float-accumulation noise."""
    parts = spec.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) != 3:
            raise ValueError
        lo, hi, step = (float(x) for x in parts)
        if step <= 0 or hi < lo:
            raise ValueError
    except ValueError:
        raise ValueError(f"bad {name} grid {spec!r} (expected START:STOP:STEP or VALUE)") from None
    values = []
    i = 0
    while True:
        v = round(lo + i * step, 10)
        if v > hi + 1e-12:
            break
        values.append(v)
        i += 1
    return values


def cmd_tune(args) -> int:
    handle = load_index(args.index)
    try:
        topics = evalkit.load_topics(args.topics, args.topics_format)
        qrels = evalkit.load_qrels(args.qrels)
        k1s = _parse_grid(args.k1_grid, "k1")
        bs = _parse_grid(args.b_grid, "b")
        grid = [(k1, b) for k1 in k1s for b in bs]
        result = sparse_search.tune_grid(
            handle, topics, qrels, grid, args.metric, threads=args.threads
        )
    finally:
        handle.close()
    for point in result.table:
        print(f"k1={point.params.k1:g}\tb={point.params.b:g}\t{args.metric}={point.metric:.6f}")
    print(f"best\tk1={result.best.k1:g}\tb={result.best.b:g}")
    return 0


def cmd_regress(args) -> int:
    spec = regression.load_regression_spec(args.spec)
    result = regression.run_regression(spec, args.workdir)
    print(result.report_path.read_text("utf-8"), end="")
    if result.error is not None:
        print(f"error: {result.error}", file=sys.stderr)
        return 2
    return 0 if result.passed else 2


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ferret", description="First-stage retrieval toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", parents=[], help="build a sparse or dense index")
    p.add_argument("--input", help="JSON/JSONL collection file or directory")
    p.add_argument("--output", required=True, help="index output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--store-positions", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--store-docvectors", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--store-raw", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--stemmer", choices=("porter", "none"), default="porter")
    p.add_argument("--stopwords", default="default",
                   help="stopword file path, or 'default' / 'none'")
    p.add_argument("--vectors", help="vector file (switches to dense indexing)")
    p.add_argument("--type", choices=("flat", "hnsw"), default="flat")
    p.add_argument("--metric", choices=("inner_product", "cosine"), default="inner_product")
    p.add_argument("--M", type=int, default=16)
    p.add_argument("--ef-construction", type=int, default=200)
    p.add_argument("--ef-search", type=int, default=128)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="batch retrieval to a run file")
    p.add_argument("--index", help="index directory (sparse or dense)")
    p.add_argument("--topics", help="topics file (sparse search)")
    p.add_argument("--topics-format", choices=("tsv", "trec"), default="tsv")
    p.add_argument("--output", required=True, help="run file to write")
    p.add_argument("--hits", type=int, default=1000)
    p.add_argument("--bm25", action="store_true",
                   help="rank with BM25 (the default and only sparse model)")
    p.add_argument("--k1", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.4)
    p.add_argument("--format", choices=("trec", "msmarco"), default="trec")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--tag", default="ferret")
    p.add_argument("--query-vectors", help="query vector file (dense search)")
    p.add_argument("--metric", choices=("inner_product", "cosine"), default="inner_product")
    p.add_argument("--ef-search", type=int, default=None)
    p.add_argument("--dense-run", help="dense run file (hybrid fusion)")
    p.add_argument("--sparse-run", help="sparse run file (hybrid fusion)")
    p.add_argument("--alpha", type=float, default=None,
                   help="sparse weight for hybrid fusion (required for hybrid)")
    p.add_argument("--run-format", choices=("trec", "msmarco"), default="trec",
                   help="format of the input runs for hybrid fusion")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="evaluate a run against qrels")
    p.add_argument("--qrels", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--format", choices=("trec", "msmarco"), default="trec")
    p.add_argument("--metrics", default="mrr@10,recall@1000,map",
                   help="comma-separated: mrr@K, recall@K, map")
    p.add_argument("--rel-threshold", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("tune", help="grid-search BM25 parameters")
    p.add_argument("--index", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--topics-format", choices=("tsv", "trec"), default="tsv")
    p.add_argument("--qrels", required=True)
    p.add_argument("--k1-grid", required=True, help="START:STOP:STEP or VALUE")
    p.add_argument("--b-grid", required=True, help="START:STOP:STEP or VALUE")
    p.add_argument("--metric", default="recall@1000")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("regress", help="run a YAML regression spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--workdir", default=".",
                   help="directory for the index, run files, and report")
    p.set_defaults(func=cmd_regress)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.command == "index" and not (args.input or args.vectors):
            raise ValueError("index needs --input (sparse) or --vectors (dense)")
        return args.func(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FerretError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
