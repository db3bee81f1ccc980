"""Sparse-dense fusion by weighted score interpolation.

fused(d) = dense_score(d) + alpha * sparse_score(d) over the union of both
candidate lists. A document missing from one list takes that list's minimum
observed score (0 when the list is empty), which bounds the penalty for
being retrieved by only one system. No default alpha: it is collection-
dependent and must be chosen explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .results import RankedList, Run, ranked_list_from_scores


@dataclass(frozen=True)
class HybridParams:
    alpha: float
    k: int = 1000
    k_candidates: int = 1000

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.k > self.k_candidates:
            raise ValueError("k must be <= k_candidates")


def fuse(dense: RankedList, sparse: RankedList, p: HybridParams) -> RankedList:
    """Fuse two rankings for the same qid; top p.k under the usual ordering."""
    if dense.qid != sparse.qid:
        raise ValueError(f"qid mismatch: dense {dense.qid!r} vs sparse {sparse.qid!r}")
    dense_scores = {hit.docid: hit.score for hit in dense.hits}
    sparse_scores = {hit.docid: hit.score for hit in sparse.hits}
    dense_min = min(dense_scores.values()) if dense_scores else 0.0
    sparse_min = min(sparse_scores.values()) if sparse_scores else 0.0
    fused = (
        (
            docid,
            dense_scores.get(docid, dense_min) + p.alpha * sparse_scores.get(docid, sparse_min),
        )
        for docid in dense_scores.keys() | sparse_scores.keys()
    )
    return ranked_list_from_scores(dense.qid, fused, k=p.k)


def hybrid_batch(
    dense_run: Run, sparse_run: Run, p: HybridParams, tag: str = "ferret"
) -> Run:
    """Fuse per qid over the union of both runs' qids; a qid missing from
    one run fuses against an empty list. Pure and thread-count independent."""
    out = Run(tag=tag)
    qids = list(dense_run.lists)
    qids += [qid for qid in sparse_run.lists if qid not in dense_run.lists]
    for qid in qids:
        d = dense_run.lists.get(qid, RankedList(qid))
        s = sparse_run.lists.get(qid, RankedList(qid))
        out.lists[qid] = fuse(d, s, p)
    return out
