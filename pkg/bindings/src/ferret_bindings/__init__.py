"""Object-oriented convenience wrappers around the ferret retrieval core.

Every class here is marshalling only: construction opens core handles,
methods call the corresponding core function, and results are repackaged
as Hit objects without touching scores or orderings. Anything numeric is
therefore bit-identical to what the core functions return, and core
exceptions propagate unchanged.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from ferret.dense_search import (
    HnswIndex,
    QueryVector,
    flat_search,
    hnsw_search,
    load_dense_index,
    load_vectors,
)
from ferret.evalkit import load_qrels, load_topics
from ferret.hybrid import HybridParams, fuse
from ferret.results import RankedList, ranked_list_from_scores
from ferret.sparse_index import Posting, TermRecord, load_index
from ferret.sparse_search import (
    Bm25Params,
    fetch_doc,
    reader_bm25_weight,
    reader_doc_vector,
    reader_postings,
    reader_term_counts,
    reader_term_positions,
    reader_terms,
    search as _sparse_search,
)

__all__ = [
    "DenseSearcher",
    "Hit",
    "HybridSearcher",
    "IndexReader",
    "SparseSearcher",
    "load_qrels",
    "load_topics",
]

__version__ = "0.1.0"


class Hit:
    """One retrieved document: docid, score, rank, and lazy contents.

    docid/score/rank are copied verbatim from the core result. `contents`
    is fetched from the index on first access (None when the searcher has
    no document store to fetch from, e.g. dense or run-file fusion).
    """

    __slots__ = ("docid", "score", "rank", "_fetch", "_contents", "_have_contents")

    def __init__(
        self, docid: str, score: float, rank: int, fetch: Callable[[str], str] | None = None
    ):
        self.docid = docid
        self.score = score
        self.rank = rank
        self._fetch = fetch
        self._contents: str | None = None
        self._have_contents = False

    @property
    def contents(self) -> str | None:
        if not self._have_contents:
            self._contents = self._fetch(self.docid) if self._fetch is not None else None
            self._have_contents = True
        return self._contents

    def __repr__(self) -> str:
        return f"Hit(docid={self.docid!r}, score={self.score!r}, rank={self.rank})"


def _wrap(rl: RankedList, fetch: Callable[[str], str] | None = None) -> list[Hit]:
    return [Hit(h.docid, h.score, h.rank, fetch) for h in rl.hits]


class SparseSearcher:
    """BM25 search over a sparse index directory."""

    def __init__(self, index_dir: str | Path):
        self._handle = load_index(index_dir)
        self._params = Bm25Params()

    def set_bm25(self, k1: float = 0.9, b: float = 0.4) -> None:
        self._params = Bm25Params(k1=k1, b=b)

    def _ranked(self, query: str, k: int, qid: str) -> RankedList:
        return _sparse_search(self._handle, query, k=k, params=self._params, qid=qid)

    def search(self, query: str, k: int = 10, qid: str = "") -> list[Hit]:
        return _wrap(self._ranked(query, k, qid), self.doc)

    def doc(self, docid: str) -> str:
        return fetch_doc(self._handle, docid)

    def close(self) -> None:
        self._handle.close()

    def __enter__(self) -> "SparseSearcher":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class DenseSearcher:
    """Vector search over a saved dense index directory or a vector file."""

    def __init__(self, path: str | Path, metric: str = "inner_product"):
        path = Path(path)
        if path.is_dir():
            self._target = load_dense_index(path)
        else:
            self._target = load_vectors(path)
        # a saved HNSW index carries its own metric; flat search takes ours
        self._metric = metric

    def _ranked(
        self, vector, k: int, qid: str, ef_search: int | None = None
    ) -> RankedList:
        q = QueryVector(qid, np.asarray(vector, dtype=np.float32))
        if isinstance(self._target, HnswIndex):
            return hnsw_search(self._target, q, k=k, ef_search=ef_search)
        return flat_search(self._target, q, k=k, metric=self._metric)

    def search(
        self, vector, k: int = 10, qid: str = "", ef_search: int | None = None
    ) -> list[Hit]:
        return _wrap(self._ranked(vector, k, qid, ef_search))


class HybridSearcher:
    """Weighted interpolation of a dense and a sparse searcher's results."""

    def __init__(self, dense: DenseSearcher, sparse: SparseSearcher):
        self.dense = dense
        self.sparse = sparse

    def search(
        self,
        query: str,
        vector,
        alpha: float,
        k: int = 10,
        k_candidates: int | None = None,
        qid: str = "",
        ef_search: int | None = None,
    ) -> list[Hit]:
        depth = k_candidates if k_candidates is not None else k
        p = HybridParams(alpha=alpha, k=k, k_candidates=depth)
        fused = fuse(
            self.dense._ranked(vector, depth, qid, ef_search),
            self.sparse._ranked(query, depth, qid),
            p,
        )
        return _wrap(fused, self.sparse.doc)

    @staticmethod
    def fuse(
        dense: Iterable[tuple[str, float]],
        sparse: Iterable[tuple[str, float]],
        alpha: float,
        k: int = 10,
        qid: str = "",
    ) -> list[Hit]:
        """Fuse two (docid, score) lists directly, without searching."""
        d = ranked_list_from_scores(qid, dense)
        s = ranked_list_from_scores(qid, sparse)
        depth = max(k, len(d.hits), len(s.hits), 1)
        return _wrap(fuse(d, s, HybridParams(alpha=alpha, k=k, k_candidates=depth)))


class IndexReader:
    """Read-only accessors over a sparse index directory."""

    def __init__(self, index_dir: str | Path):
        self._handle = load_index(index_dir)

    @property
    def stats(self):
        return self._handle.stats

    def terms(self) -> Iterator[TermRecord]:
        return reader_terms(self._handle)

    def term_counts(self, term: str, analyzed: bool = True) -> tuple[int, int]:
        return reader_term_counts(self._handle, term, analyzed=analyzed)

    def postings(self, term: str) -> list[Posting]:
        return reader_postings(self._handle, term)

    def doc_vector(self, docid: str) -> dict[str, int]:
        return reader_doc_vector(self._handle, docid)

    def term_positions(self, docid: str) -> dict[str, list[int]]:
        return reader_term_positions(self._handle, docid)

    def bm25_weight(self, docid: str, term: str, k1: float = 0.9, b: float = 0.4) -> float:
        return reader_bm25_weight(self._handle, docid, term, Bm25Params(k1=k1, b=b))

    def doc(self, docid: str) -> str:
        return fetch_doc(self._handle, docid)

    def close(self) -> None:
        self._handle.close()

    def __enter__(self) -> "IndexReader":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
