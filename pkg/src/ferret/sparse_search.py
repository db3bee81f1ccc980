"""BM25 top-k retrieval over a SparseIndexHandle, plus index-reader helpers.

Traversal is document-at-a-time over the union of query-term postings. The
per-document sum runs in query-term order, so scores match a brute-force
forward-index scorer bit for bit, and the top-k heap applies the docid
tie-break inside its comparator so results are independent of traversal
order and thread count.
"""

from __future__ import annotations

import heapq
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

from .analysis import analyze
from .errors import NotStoredError
from .results import RankedList, Run, ScoredDoc, ranked_list_from_scores
from .sparse_index import CollectionStats, Posting, SparseIndexHandle, TermRecord

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")


def bm25_score(tf: int, df: int, dl: int, stats: CollectionStats, p: Bm25Params) -> float:
    """Lucene-flavored BM25 with exact document lengths (no norm quantization).

    idf = ln(1 + (N - df + 0.5) / (df + 0.5))
    weight = idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
    """
    assert tf >= 1, "tf must be >= 1"
    assert 1 <= df <= stats.doc_count, "df out of range"
    idf = math.log(1.0 + (stats.doc_count - df + 0.5) / (df + 0.5))
    norm = 1.0 - p.b + p.b * dl / stats.avg_doc_length
    return idf * (tf * (p.k1 + 1.0)) / (tf + p.k1 * norm)


# ---------------------------------------------------------------------------
# Top-k selection
# ---------------------------------------------------------------------------


class _RevStr:
    """Reverses string comparison so a min-heap keyed (score, _RevStr(docid))
    surfaces the worst hit under (score desc, docid asc) at heap[0]."""

    __slots__ = ("s",)

    def __init__(self, s: str):
        self.s = s

    def __lt__(self, other: "_RevStr") -> bool:
        return other.s < self.s

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _RevStr) and other.s == self.s


class TopK:
    """Bounded heap keeping the k best (docid, score) pairs."""

    def __init__(self, k: int):
        self.k = k
        self._heap: list[tuple[float, _RevStr]] = []

    def offer(self, docid: str, score: float) -> None:
        item = (score, _RevStr(docid))
        if len(self._heap) < self.k:
            heapq.heappush(self._heap, item)
        elif self._heap[0] < item:
            heapq.heapreplace(self._heap, item)

    def items(self) -> list[tuple[str, float]]:
        return [(rev.s, score) for score, rev in self._heap]


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


def _query_slots(index: SparseIndexHandle, query: str) -> list[tuple[str, int]]:
    """Distinct analyzed query terms in first-occurrence order with query tf."""
    counts: dict[str, int] = {}
    for tok in analyze(query, index.analyzer):
        counts[tok.term] = counts.get(tok.term, 0) + 1
    return list(counts.items())


def _scored_union(
    index: SparseIndexHandle, slots: list[tuple[str, int]], p: Bm25Params
) -> Iterator[tuple[int, float]]:
    """Yield (ordinal, score) for every document matching >= 1 query term.

    Postings streams merge on (ordinal, slot), so each document's terms are
    summed in query order: the float result is identical to scoring that
    document alone from its forward vector.
    """
    stats = index.stats
    streams = []
    dfs = []
    for si, (term, _) in enumerate(slots):
        plist = index.postings(term)
        if not plist:
            dfs.append(0)
            continue
        dfs.append(len(plist))
        streams.append([(post.doc, si, post.tf) for post in plist])
    if not streams:
        return
    doclens = stats.doc_lengths
    cur = -1
    acc = 0.0
    for ordinal, si, tf in heapq.merge(*streams):
        if ordinal != cur:
            if cur >= 0:
                yield cur, acc
            cur, acc = ordinal, 0.0
        qtf = slots[si][1]
        acc += qtf * bm25_score(tf, dfs[si], doclens[ordinal], stats, p)
    if cur >= 0:
        yield cur, acc


def search(
    index: SparseIndexHandle,
    query: str,
    k: int = 10,
    params: Bm25Params | None = None,
    qid: str = "",
) -> RankedList:
    """BM25 top-k for one query string, analyzed with the index's analyzer.

    A query that analyzes to zero terms (or hits no postings) returns an
    empty list rather than raising.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    p = params if params is not None else Bm25Params()
    slots = _query_slots(index, query)
    top = TopK(k)
    for ordinal, score in _scored_union(index, slots, p):
        top.offer(index.docids[ordinal], score)
    return ranked_list_from_scores(qid, top.items(), k=k)


def batch_search(
    index: SparseIndexHandle,
    topics: dict[str, dict[str, str]],
    k: int = 1000,
    params: Bm25Params | None = None,
    threads: int = 1,
    tag: str = "ferret",
) -> Run:
    """One RankedList per topic ("title" field). Output is independent of
    `threads`: queries are distributed across workers, but result order is
    the topics order and each per-query search is single-threaded."""
    items = [(qid, fields["title"]) for qid, fields in topics.items()]
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            lists = list(ex.map(lambda it: search(index, it[1], k, params, qid=it[0]), items))
    else:
        lists = [search(index, text, k, params, qid=qid) for qid, text in items]
    return Run(tag=tag, lists={rl.qid: rl for rl in lists})


# ---------------------------------------------------------------------------
# Index-reader surface
# ---------------------------------------------------------------------------


def reader_terms(index: SparseIndexHandle) -> Iterator[TermRecord]:
    """Full dictionary in lexicographic term order."""
    return index.iter_terms()


def reader_term_counts(
    index: SparseIndexHandle, term: str, analyzed: bool = True
) -> tuple[int, int]:
    """(df, cf) for a term; (0, 0) when absent.

    With analyzed=False the term is passed through the index's analyzer
    first, so "atomic" resolves to the counts of "atom". A term that
    analyzes away (stopword) or to multiple tokens uses the first token.
    """
    if not analyzed:
        toks = analyze(term, index.analyzer)
        if not toks:
            return (0, 0)
        term = toks[0].term
    rec = index.term_stats(term)
    if rec is None:
        return (0, 0)
    return (rec.df, rec.cf)


def reader_postings(index: SparseIndexHandle, term: str) -> list[Posting]:
    """Postings with positions, sorted by doc ordinal; [] for absent terms."""
    if not index.store_positions:
        raise NotStoredError("positions not stored: rebuild with store_positions")
    return index.postings(term)


def reader_doc_vector(index: SparseIndexHandle, docid: str) -> dict[str, int]:
    """term -> tf for one document (covers exactly its analyzed terms)."""
    ordinal = index.ordinal(docid)
    return {term: tf for term, tf, _ in index.doc_vector(ordinal)}


def reader_term_positions(index: SparseIndexHandle, docid: str) -> dict[str, list[int]]:
    """term -> positions for one document."""
    if not index.store_positions:
        raise NotStoredError("positions not stored: rebuild with store_positions")
    ordinal = index.ordinal(docid)
    return {term: list(positions) for term, _, positions in index.doc_vector(ordinal)}


def reader_bm25_weight(
    index: SparseIndexHandle, docid: str, term: str, params: Bm25Params | None = None
) -> float:
    """BM25 weight of an analyzed term in one document; 0.0 when absent."""
    p = params if params is not None else Bm25Params()
    ordinal = index.ordinal(docid)
    tf = 0
    for t, f, _ in index.doc_vector(ordinal):
        if t == term:
            tf = f
            break
    if tf == 0:
        return 0.0
    rec = index.term_stats(term)
    assert rec is not None
    return bm25_score(tf, rec.df, index.stats.doc_lengths[ordinal], index.stats, p)


def fetch_doc(index: SparseIndexHandle, docid: str) -> str:
    """Stored text for a docid: the raw record when one was ingested, else
    the contents field. Byte-identical to the ingested value."""
    ordinal = index.ordinal(docid)
    contents, raw = index.stored_text(ordinal)
    return raw if raw is not None else contents


# ---------------------------------------------------------------------------
# MaxP aggregation and parameter tuning
# ---------------------------------------------------------------------------


def aggregate_max_passage(run: Run, separator: str = "#") -> Run:
    """Collapse passage-level hits `<parent><sep><ordinal>` to parent docs,
    scoring each parent by its best passage. Docids without the separator
    count as their own parent (warned once per docid)."""
    out = Run(tag=run.tag)
    for qid, rl in run.lists.items():
        best: dict[str, float] = {}
        for hit in rl.hits:
            parent, sep, _ = hit.docid.rpartition(separator)
            if not sep:
                logger.warning(
                    "docid %r has no separator %r; treating it as its own parent",
                    hit.docid,
                    separator,
                )
                parent = hit.docid
            if parent not in best or hit.score > best[parent]:
                best[parent] = hit.score
        out.lists[qid] = ranked_list_from_scores(qid, best.items())
    return out


class TunePoint(NamedTuple):
    params: Bm25Params
    metric: float


class TuneResult(NamedTuple):
    best: Bm25Params
    table: list[TunePoint]


def tune_grid(
    index: SparseIndexHandle,
    topics: dict[str, dict[str, str]],
    qrels: dict[str, dict[str, int]],
    grid: Iterable[tuple[float, float]],
    target_metric: str = "recall@1000",
    threads: int = 1,
) -> TuneResult:
    """Exhaustive (k1, b) grid search maximizing target_metric.

    Ties prefer smaller k1, then smaller b. The full grid -> metric table
    comes back alongside the winner so callers can print it.
    """
    from . import evalkit

    points = [Bm25Params(k1, b) for k1, b in grid]
    if not points:
        raise ValueError("empty parameter grid")
    _, cutoff = evalkit.parse_metric(target_metric)
    depth = cutoff if cutoff is not None else 1000
    table = []
    for p in points:
        run = batch_search(index, topics, k=depth, params=p, threads=threads)
        value = evalkit.evaluate_run(run, qrels, [target_metric]).values[target_metric]
        table.append(TunePoint(p, value))
    best = min(table, key=lambda tp: (-tp.metric, tp.params.k1, tp.params.b)).params
    return TuneResult(best, table)
