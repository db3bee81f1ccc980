"""Ranked retrieval results shared by every searcher.

Ordering is uniform across the toolkit: scores non-increasing, ties broken
by external docid ascending, ranks contiguous from 1. Every ranked list the
toolkit emits is built through `ranked_list_from_scores` so regressions stay
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple


class ScoredDoc(NamedTuple):
    docid: str
    score: float
    rank: int


@dataclass
class RankedList:
    qid: str
    hits: list[ScoredDoc] = field(default_factory=list)

    def __iter__(self) -> Iterator[ScoredDoc]:
        return iter(self.hits)

    def __len__(self) -> int:
        return len(self.hits)


@dataclass
class Run:
    """Per-query ranked lists plus the run tag used in TREC output."""

    tag: str = "ferret"
    lists: dict[str, RankedList] = field(default_factory=dict)

    def __getitem__(self, qid: str) -> RankedList:
        return self.lists[qid]

    def __contains__(self, qid: str) -> bool:
        return qid in self.lists

    def qids(self) -> list[str]:
        return list(self.lists)


def ranked_list_from_scores(
    qid: str, scored: Iterable[tuple[str, float]], k: int | None = None
) -> RankedList:
    """Sort (docid, score) pairs under the canonical ordering and rank them."""
    ordered = sorted(scored, key=lambda e: (-e[1], e[0]))
    if k is not None:
        ordered = ordered[:k]
    hits = [ScoredDoc(docid, float(score), rank) for rank, (docid, score) in enumerate(ordered, 1)]
    return RankedList(qid, hits)


def check_ranked_list(rl: RankedList) -> None:
    """Raise ValueError when the ordering invariant is violated."""
    seen = set()
    for i, hit in enumerate(rl.hits):
        if hit.rank != i + 1:
            raise ValueError(f"qid {rl.qid}: rank {hit.rank} at position {i + 1}")
        if hit.docid in seen:
            raise ValueError(f"qid {rl.qid}: duplicate docid {hit.docid}")
        seen.add(hit.docid)
        if i > 0:
            prev = rl.hits[i - 1]
            if hit.score > prev.score:
                raise ValueError(f"qid {rl.qid}: score increases at rank {hit.rank}")
            if hit.score == prev.score and hit.docid < prev.docid:
                raise ValueError(f"qid {rl.qid}: docid tie-break violated at rank {hit.rank}")
