"""Test-collection management: topics, qrels, run files, and metrics.

Metric conventions (documented, configurable, applied consistently):
  - a document is relevant when its grade >= rel_threshold (default 1);
  - the evaluated query set is every qrels qid with at least one relevant
    document; evaluated qids absent from the run contribute 0;
  - run qids with no judgments are skipped and surfaced via
    `queries_skipped` rather than silently folded into the mean.

All files are UTF-8; writes use LF endings, reads tolerate CRLF.
"""

from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Iterable, NamedTuple

from .errors import FileFormatError
from .results import RankedList, Run, ScoredDoc

logger = logging.getLogger(__name__)

Topics = dict[str, dict[str, str]]
Qrels = dict[str, dict[str, int]]


# ---------------------------------------------------------------------------
# Topics
# ---------------------------------------------------------------------------


def load_topics(path: str | Path, format: str = "tsv") -> Topics:
    """Parse topics as qid -> field map; every topic carries a "title".

    tsv: one `qid<TAB>title` per line. trec: classic `<top>` markup with
    <num>/<title>/<desc>/<narr> fields; unknown tags are ignored.
    """
    p = Path(path)
    if format == "tsv":
        return _load_topics_tsv(p)
    if format == "trec":
        return _load_topics_trec(p)
    raise ValueError(f"unknown topics format {format!r} (expected tsv or trec)")


def _load_topics_tsv(path: Path) -> Topics:
    topics: Topics = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise FileFormatError(f"{path}: line {lineno}: expected qid<TAB>title")
            qid, title = parts[0].strip(), parts[1].strip()
            if not qid or not title:
                raise FileFormatError(f"{path}: line {lineno}: empty qid or title")
            if qid in topics:
                raise FileFormatError(f"{path}: line {lineno}: duplicate qid {qid!r}")
            topics[qid] = {"title": title}
    return topics


_TREC_FIELD_TAGS = {"title": "title", "desc": "description", "narr": "narrative"}
_TREC_LABEL_RE = re.compile(r"\A\s*(Number|Topic|Description|Narrative)\s*:\s*", re.IGNORECASE)


def _load_topics_trec(path: Path) -> Topics:
    topics: Topics = {}
    qid: str | None = None
    fields: dict[str, list[str]] | None = None
    current: str | None = None  # active field key, or "" while ignoring a tag

    def flush(lineno: int) -> None:
        nonlocal qid, fields
        if fields is None:
            raise FileFormatError(f"{path}: line {lineno}: </top> without <top>")
        if qid is None:
            raise FileFormatError(f"{path}: line {lineno}: topic without <num>")
        joined = {k: " ".join(" ".join(v).split()) for k, v in fields.items()}
        if not joined.get("title"):
            raise FileFormatError(f"{path}: line {lineno}: topic {qid!r} has no title")
        if qid in topics:
            raise FileFormatError(f"{path}: line {lineno}: duplicate qid {qid!r}")
        topics[qid] = {k: v for k, v in joined.items() if v}
        qid, fields = None, None

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.lower().startswith("<top>"):
                if fields is not None:
                    raise FileFormatError(f"{path}: line {lineno}: nested <top>")
                fields, current = {}, None
                continue
            if stripped.lower().startswith("</top>"):
                flush(lineno)
                current = None
                continue
            if fields is None:
                raise FileFormatError(f"{path}: line {lineno}: content outside <top>")
            m = re.match(r"\A<(/?)([a-zA-Z]+)>\s*(.*)\Z", stripped)
            if m:
                closing, tag, rest = m.group(1), m.group(2).lower(), m.group(3)
                if closing:
                    current = None
                    continue
                if tag == "num":
                    qid = _TREC_LABEL_RE.sub("", rest).strip()
                    if not qid:
                        raise FileFormatError(f"{path}: line {lineno}: empty <num>")
                    current = None
                elif tag in _TREC_FIELD_TAGS:
                    current = _TREC_FIELD_TAGS[tag]
                    rest = _TREC_LABEL_RE.sub("", rest)
                    fields.setdefault(current, [])
                    if rest.strip():
                        fields[current].append(rest.strip())
                else:
                    current = ""  # recognized markup we deliberately drop
                continue
            if current is None:
                raise FileFormatError(f"{path}: line {lineno}: text outside any field")
            if current:
                fields[current].append(stripped)
    if fields is not None:
        raise FileFormatError(f"{path}: unterminated <top> at end of file")
    return topics


# ---------------------------------------------------------------------------
# Qrels
# ---------------------------------------------------------------------------


def load_qrels(path: str | Path) -> Qrels:
    """Parse `qid 0 docid grade` lines (second column ignored). Later
    duplicates of a (qid, docid) pair overwrite the grade with a warning."""
    p = Path(path)
    qrels: Qrels = {}
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FileFormatError(f"{p}: line {lineno}: expected 4 fields, got {len(parts)}")
            qid, _, docid, grade_s = parts
            try:
                grade = int(grade_s)
            except ValueError:
                raise FileFormatError(
                    f"{p}: line {lineno}: non-integer grade {grade_s!r}"
                ) from None
            if qid in qrels and docid in qrels[qid]:
                logger.warning(
                    "%s: line %d: duplicate judgment for (%s, %s); keeping grade %d",
                    p, lineno, qid, docid, grade,
                )
            qrels.setdefault(qid, {})[docid] = grade
    return qrels


# ---------------------------------------------------------------------------
# Run files
# ---------------------------------------------------------------------------


def write_run(run: Run, path: str | Path, format: str = "trec") -> None:
    """Write a run in TREC (`qid Q0 docid rank score tag`, 6-decimal scores)
    or MS MARCO (`qid<TAB>docid<TAB>rank`) format.

    Missing parent directories are created, like every other writer here."""
    if format not in ("trec", "msmarco"):
        raise ValueError(f"unknown run format {format!r} (expected trec or msmarco)")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid, rl in run.lists.items():
            for hit in rl.hits:
                if format == "trec":
                    fh.write(f"{qid} Q0 {hit.docid} {hit.rank} {hit.score:.6f} {run.tag}\n")
                else:
                    fh.write(f"{qid}\t{hit.docid}\t{hit.rank}\n")


def read_run(path: str | Path, format: str = "trec") -> Run:
    """Read a run file, preserving hit order exactly.

    Validation: ranks per qid contiguous from 1 and scores non-increasing;
    violations raise with the offending line. MS MARCO lines carry no score,
    so hits get synthetic scores 1/rank to keep downstream ordering stable.
    """
    if format not in ("trec", "msmarco"):
        raise ValueError(f"unknown run format {format!r} (expected trec or msmarco)")
    p = Path(path)
    lists: dict[str, RankedList] = {}
    last: dict[str, ScoredDoc] = {}
    tag = "ferret"
    saw_tag = False
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            if format == "trec":
                parts = line.split()
                if len(parts) != 6:
                    raise FileFormatError(f"{p}: line {lineno}: expected 6 fields")
                qid, _, docid, rank_s, score_s, line_tag = parts
                if not saw_tag:
                    tag, saw_tag = line_tag, True
                try:
                    rank, score = int(rank_s), float(score_s)
                except ValueError:
                    raise FileFormatError(
                        f"{p}: line {lineno}: bad rank or score"
                    ) from None
            else:
                parts = line.split("\t")
                if len(parts) != 3:
                    raise FileFormatError(f"{p}: line {lineno}: expected 3 tab-separated fields")
                qid, docid, rank_s = parts
                try:
                    rank = int(rank_s)
                except ValueError:
                    raise FileFormatError(f"{p}: line {lineno}: bad rank") from None
                score = 1.0 / rank if rank >= 1 else 0.0
            prev = last.get(qid)
            if prev is None:
                if rank != 1:
                    raise FileFormatError(f"{p}: line {lineno}: qid {qid!r} starts at rank {rank}")
            else:
                if rank != prev.rank + 1:
                    raise FileFormatError(
                        f"{p}: line {lineno}: rank {rank} after {prev.rank} for qid {qid!r}"
                    )
                if score > prev.score:
                    raise FileFormatError(
                        f"{p}: line {lineno}: score increases at rank {rank} for qid {qid!r}"
                    )
            hit = ScoredDoc(docid, score, rank)
            last[qid] = hit
            lists.setdefault(qid, RankedList(qid)).hits.append(hit)
    return Run(tag=tag, lists=lists)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def parse_metric(name: str) -> tuple[str, int | None]:
    """"mrr@10" -> ("mrr", 10); "recall@100" -> ("recall", 100); "map" -> ("map", None)."""
    n = name.strip().lower()
    if n == "map":
        return ("map", None)
    for kind in ("mrr", "recall"):
        if n.startswith(kind + "@"):
            try:
                cutoff = int(n[len(kind) + 1 :])
            except ValueError:
                break
            if cutoff < 1:
                raise ValueError(f"metric cutoff must be >= 1: {name!r}")
            return (kind, cutoff)
    raise ValueError(f"unknown metric {name!r}; supported: mrr@K, recall@K, map")


def _relevant(qrels: Qrels, qid: str, rel_threshold: int) -> set[str]:
    return {d for d, g in qrels[qid].items() if g >= rel_threshold}


def _evaluated_qids(qrels: Qrels, rel_threshold: int) -> list[str]:
    return [qid for qid in qrels if any(g >= rel_threshold for g in qrels[qid].values())]


def mrr(run: Run, qrels: Qrels, k: int = 10, rel_threshold: int = 1) -> float:
    """Mean over evaluated queries of 1/rank of the first relevant doc in
    the top k (0 when none)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    qids = _evaluated_qids(qrels, rel_threshold)
    if not qids:
        return 0.0
    total = 0.0
    for qid in qids:
        rel = _relevant(qrels, qid, rel_threshold)
        rl = run.lists.get(qid)
        if rl is None:
            continue
        for hit in rl.hits[:k]:
            if hit.docid in rel:
                total += 1.0 / hit.rank
                break
    return total / len(qids)


def recall(run: Run, qrels: Qrels, k: int = 1000, rel_threshold: int = 1) -> float:
    """Mean over evaluated queries of |relevant in top-k| / |relevant|."""
    if k < 1:
        raise ValueError("k must be >= 1")
    qids = _evaluated_qids(qrels, rel_threshold)
    if not qids:
        return 0.0
    total = 0.0
    for qid in qids:
        rel = _relevant(qrels, qid, rel_threshold)
        rl = run.lists.get(qid)
        if rl is None:
            continue
        found = sum(1 for hit in rl.hits[:k] if hit.docid in rel)
        total += found / len(rel)
    return total / len(qids)


def average_precision(run: Run, qrels: Qrels, rel_threshold: int = 1) -> float:
    """Mean average precision over the full run depth."""
    qids = _evaluated_qids(qrels, rel_threshold)
    if not qids:
        return 0.0
    total = 0.0
    for qid in qids:
        rel = _relevant(qrels, qid, rel_threshold)
        rl = run.lists.get(qid)
        if rl is None:
            continue
        found = 0
        ap = 0.0
        for hit in rl.hits:
            if hit.docid in rel:
                found += 1
                ap += found / hit.rank
        total += ap / len(rel)
    return total / len(qids)


class EvalResult(NamedTuple):
    values: dict[str, float]
    queries_evaluated: int
    queries_skipped: int


def evaluate_run(
    run: Run, qrels: Qrels, metrics: Iterable[str], rel_threshold: int = 1
) -> EvalResult:
    """Compute named metrics over a run; see module docstring for the
    evaluated/skipped query conventions."""
    values: dict[str, float] = {}
    for name in metrics:
        kind, cutoff = parse_metric(name)
        if kind == "mrr":
            values[name] = mrr(run, qrels, cutoff, rel_threshold)
        elif kind == "recall":
            values[name] = recall(run, qrels, cutoff, rel_threshold)
        else:
            values[name] = average_precision(run, qrels, rel_threshold)
    evaluated = len(_evaluated_qids(qrels, rel_threshold))
    skipped = sum(1 for qid in run.lists if qid not in qrels)
    return EvalResult(values, evaluated, skipped)
