"""Top-k retrieval over fixed-dimension float32 vectors.

Two engines share one scoring kernel: a flat store scanned exactly, and a
seeded, single-threaded HNSW graph for approximate search. Scores are always
the true metric values recomputed from raw vectors; approximation affects
which candidates surface, never the numbers reported for them.

The scoring kernel accumulates float32 products in float64 via numpy's
axis reduction. The same reduction runs for one row or a whole matrix, so
flat scans, graph traversal, and verification all agree bitwise.
"""

from __future__ import annotations

import heapq
import json
import math
import random
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from ._binio import HashingWriter, sha256_file
from .errors import (
    CollectionError,
    DimensionMismatchError,
    FileFormatError,
    IndexLoadError,
    IndexVersionError,
)
from .results import RankedList, Run, ranked_list_from_scores

_MAGIC = b"FVEC"
_VEC_VERSION = 1
_METRICS = ("inner_product", "cosine")

FLAT_FORMAT = "ferret-dense-flat"
HNSW_FORMAT = "ferret-dense-hnsw"
DENSE_FORMAT_VERSION = 1


class QueryVector(NamedTuple):
    qid: str
    vec: np.ndarray


@dataclass(eq=False)
class VectorStore:
    """Row-major float32 matrix with unique external ids per row."""

    dim: int
    count: int
    ids: list[str]
    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.shape != (self.count, self.dim):
            raise CollectionError(
                f"vector data shape {self.data.shape} != ({self.count}, {self.dim})"
            )
        if len(self.ids) != self.count:
            raise CollectionError(f"{len(self.ids)} ids for {self.count} vectors")
        finite = np.isfinite(self.data)
        if not finite.all():
            row = int(np.argwhere(~finite)[0][0])
            raise CollectionError(f"non-finite value in vector {self.ids[row]!r}")
        self._row_of = {docid: i for i, docid in enumerate(self.ids)}
        if len(self._row_of) != self.count:
            seen: set[str] = set()
            for docid in self.ids:
                if docid in seen:
                    raise CollectionError(f"duplicate vector id {docid!r}")
                seen.add(docid)
        # ascending-docid rank per row, for score tie-breaks in lexsort
        order = np.argsort(np.array(self.ids))
        self.id_rank = np.empty(self.count, dtype=np.int64)
        self.id_rank[order] = np.arange(self.count)
        self._norms: np.ndarray | None = None

    @property
    def norms(self) -> np.ndarray:
        """Per-row L2 norms, float64, computed once on first use."""
        if self._norms is None:
            self._norms = np.sqrt((self.data * self.data).sum(axis=1, dtype=np.float64))
        return self._norms

    def row(self, docid: str) -> int:
        return self._row_of[docid]


def _check_metric(metric: str) -> None:
    if metric not in _METRICS:
        raise ValueError(f"unknown metric {metric!r} (expected one of {_METRICS})")


def _as_query(vec, dim: int, qid: str) -> np.ndarray:
    q = np.ascontiguousarray(vec, dtype=np.float32)
    if q.shape != (dim,):
        raise DimensionMismatchError(
            f"query {qid!r}: expected dim {dim}, got shape {tuple(q.shape)}"
        )
    if not np.isfinite(q).all():
        raise CollectionError(f"query {qid!r}: non-finite value")
    return q


def _all_scores(store: VectorStore, q: np.ndarray, metric: str) -> np.ndarray:
    dots = (store.data * q).sum(axis=1, dtype=np.float64)
    if metric == "inner_product":
        return dots
    qn = math.sqrt(float((q * q).sum(dtype=np.float64)))
    denom = store.norms * qn
    safe = np.where(denom > 0.0, denom, 1.0)
    return np.where(denom > 0.0, dots / safe, 0.0)


def _pair_score(store: VectorStore, i: int, q: np.ndarray, qnorm: float, metric: str) -> float:
    dot = float((store.data[i] * q).sum(dtype=np.float64))
    if metric == "inner_product":
        return dot
    denom = float(store.norms[i]) * qnorm
    return dot / denom if denom > 0.0 else 0.0


def _gather_scores(
    store: VectorStore, nodes: list[int], q: np.ndarray, qnorm: float, metric: str
) -> np.ndarray:
    """Scores of several rows against q. Row-for-row identical to
    _pair_score: the axis-1 reduction is the same per-row sum."""
    dots = (store.data[nodes] * q).sum(axis=1, dtype=np.float64)
    if metric == "inner_product":
        return dots
    denom = store.norms[nodes] * qnorm
    safe = np.where(denom > 0.0, denom, 1.0)
    return np.where(denom > 0.0, dots / safe, 0.0)


# ---------------------------------------------------------------------------
# Vector file I/O
# ---------------------------------------------------------------------------


def load_vectors(path: str | Path) -> VectorStore:
    """Read vectors from the binary format or JSONL `{"id":…, "vector":[…]}`.

    The declared dimension comes from the header (binary) or the first row
    (JSONL); any row disagreeing is rejected by id.
    """
    p = Path(path)
    if p.suffix in (".jsonl", ".json"):
        return _load_vectors_jsonl(p)
    return _load_vectors_binary(p)


def _load_vectors_jsonl(p: Path) -> VectorStore:
    ids: list[str] = []
    rows: list[list[float]] = []
    dim: int | None = None
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise FileFormatError(f"{p}: line {lineno}: {e.msg}") from e
            if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
                raise FileFormatError(f"{p}: line {lineno}: expected object with string 'id'")
            vec = obj.get("vector")
            if not isinstance(vec, list) or not all(isinstance(x, (int, float)) for x in vec):
                raise FileFormatError(
                    f"{p}: line {lineno}: record {obj['id']!r} needs a numeric 'vector'"
                )
            if dim is None:
                dim = len(vec)
                if dim == 0:
                    raise FileFormatError(f"{p}: line {lineno}: zero-length vector")
            elif len(vec) != dim:
                raise DimensionMismatchError(
                    f"{p}: vector {obj['id']!r} has {len(vec)} values, expected {dim}"
                )
            ids.append(obj["id"])
            rows.append(vec)
    if dim is None:
        raise CollectionError(f"{p}: no vectors found")
    data = np.array(rows, dtype=np.float32)
    return VectorStore(dim=dim, count=len(ids), ids=ids, data=data)


def _load_vectors_binary(p: Path) -> VectorStore:
    blob = p.read_bytes()
    if blob[:4] != _MAGIC:
        raise FileFormatError(f"{p}: not a vector file (bad magic)")
    version, dim = struct.unpack_from("<II", blob, 4)
    (count,) = struct.unpack_from("<Q", blob, 12)
    if version != _VEC_VERSION:
        raise FileFormatError(f"{p}: unsupported vector file version {version}")
    off = 20
    nbytes = count * dim * 4
    if len(blob) < off + nbytes:
        raise FileFormatError(f"{p}: truncated vector data")
    data = np.frombuffer(blob, dtype="<f4", count=count * dim, offset=off).reshape(count, dim)
    off += nbytes
    ids = []
    for _ in range(count):
        if len(blob) < off + 4:
            raise FileFormatError(f"{p}: truncated id table")
        (n,) = struct.unpack_from("<I", blob, off)
        off += 4
        ids.append(blob[off : off + n].decode("utf-8"))
        off += n
    return VectorStore(dim=dim, count=count, ids=ids, data=data.copy())


def save_vectors(store: VectorStore, path: str | Path, format: str = "binary") -> dict:
    """Write a store; returns {"bytes":…, "sha256":…} of the written file."""
    p = Path(path)
    if format == "jsonl":
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            for docid, row in zip(store.ids, store.data):
                rec = {"id": docid, "vector": [float(x) for x in row]}
                fh.write(json.dumps(rec) + "\n")
        return {"bytes": p.stat().st_size, "sha256": sha256_file(p)}
    if format != "binary":
        raise ValueError(f"unknown vector format {format!r} (expected binary or jsonl)")
    with open(p, "wb") as fh:
        w = HashingWriter(fh)
        w.write(_MAGIC)
        w.write(struct.pack("<II", _VEC_VERSION, store.dim))
        w.write(struct.pack("<Q", store.count))
        w.write(np.ascontiguousarray(store.data, dtype="<f4").tobytes())
        for docid in store.ids:
            w.string(docid)
        return {"bytes": w.nbytes, "sha256": w.hexdigest()}


def load_query_vectors(path: str | Path) -> list[QueryVector]:
    """Queries use the same file formats as documents; ids become qids."""
    store = load_vectors(path)
    return [QueryVector(qid, store.data[i]) for i, qid in enumerate(store.ids)]


# ---------------------------------------------------------------------------
# Flat exact search
# ---------------------------------------------------------------------------


def flat_search(
    store: VectorStore, q: QueryVector, k: int = 10, metric: str = "inner_product"
) -> RankedList:
    """Exact top-k by brute-force scan; ties broken by docid ascending."""
    if k < 1:
        raise ValueError("k must be >= 1")
    _check_metric(metric)
    qv = _as_query(q.vec, store.dim, q.qid)
    scores = _all_scores(store, qv, metric)
    order = np.lexsort((store.id_rank, -scores))[:k]
    items = [(store.ids[i], float(scores[i])) for i in order]
    return ranked_list_from_scores(q.qid, items, k=k)


# ---------------------------------------------------------------------------
# HNSW
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HnswParams:
    M: int = 16
    ef_construction: int = 200
    ef_search: int = 128
    seed: int = 42

    def __post_init__(self) -> None:
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if self.ef_construction < self.M:
            raise ValueError("ef_construction must be >= M")
        if self.ef_search < 1:
            raise ValueError("ef_search must be >= 1")


@dataclass(eq=False)
class HnswIndex:
    """Layered proximity graph over a VectorStore. Immutable once built."""

    store: VectorStore
    params: HnswParams
    metric: str
    levels: list[int]
    neighbors: list[list[list[int]]]  # neighbors[node][layer] -> node ids
    entry: int
    max_level: int

    # distances are negated scores, so smaller is closer for both metrics

    def _dist_to(self, q: np.ndarray, qnorm: float, node: int) -> float:
        return -_pair_score(self.store, node, q, qnorm, self.metric)

    def _search_layer(
        self,
        q: np.ndarray,
        qnorm: float,
        eps: list[tuple[float, int]],
        ef: int,
        layer: int,
    ) -> list[tuple[float, int]]:
        """Greedy beam search on one layer; returns up to ef (dist, node)
        pairs sorted ascending. Deterministic: heap keys are (dist, node)."""
        visited = {n for _, n in eps}
        cand = list(eps)
        heapq.heapify(cand)
        best = [(-d, n) for d, n in eps]
        heapq.heapify(best)
        while len(best) > ef:
            heapq.heappop(best)
        while cand:
            d, c = heapq.heappop(cand)
            if d > -best[0][0]:
                break
            fresh = [nb for nb in self.neighbors[c][layer] if nb not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            dists = -_gather_scores(self.store, fresh, q, qnorm, self.metric)
            for nb, dn in zip(fresh, dists):
                dn = float(dn)
                if len(best) < ef or dn < -best[0][0]:
                    heapq.heappush(cand, (dn, nb))
                    heapq.heappush(best, (-dn, nb))
                    if len(best) > ef:
                        heapq.heappop(best)
        return sorted((-nd, n) for nd, n in best)

    def _select_heuristic(
        self, cands: list[tuple[float, int]], m: int
    ) -> list[tuple[float, int]]:
        """Neighbor selection favoring spread: a candidate is kept only if it
        is closer to the base point than to every already-kept neighbor.
        Keep-pruned-connections is disabled, so fewer than m may survive."""
        result: list[tuple[float, int]] = []
        kept: list[int] = []
        for d, e in sorted(cands):
            if len(result) >= m:
                break
            if kept:
                qn = float(self.store.norms[e]) if self.metric == "cosine" else 0.0
                between = -_gather_scores(self.store, kept, self.store.data[e], qn, self.metric)
                if not (between >= d).all():
                    continue
            result.append((d, e))
            kept.append(e)
        return result


def hnsw_build(
    store: VectorStore, params: HnswParams | None = None, metric: str = "inner_product"
) -> HnswIndex:
    """Single-threaded deterministic build.

    Node levels are floor(-ln(u) / ln(M)) with u drawn once per node, in
    insertion order, from random.Random(seed). Inserts descend greedily to
    the node's level, then link via the spread heuristic; degrees are capped
    at M above layer 0 and 2M at layer 0.
    """
    p = params if params is not None else HnswParams()
    _check_metric(metric)
    if store.count < 1:
        raise ValueError("cannot build an HNSW index over an empty store")

    rng = random.Random(p.seed)
    mult = 1.0 / math.log(p.M)
    levels = [int(math.floor(-math.log(1.0 - rng.random()) * mult)) for _ in range(store.count)]
    neighbors = [[[] for _ in range(lv + 1)] for lv in levels]

    index = HnswIndex(
        store=store,
        params=p,
        metric=metric,
        levels=levels,
        neighbors=neighbors,
        entry=0,
        max_level=levels[0],
    )

    norms = store.norms if metric == "cosine" else None
    for i in range(1, store.count):
        q = store.data[i]
        qnorm = float(norms[i]) if norms is not None else 0.0
        lv = levels[i]
        eps = [(index._dist_to(q, qnorm, index.entry), index.entry)]
        for layer in range(index.max_level, lv, -1):
            eps = index._search_layer(q, qnorm, eps, 1, layer)
        for layer in range(min(lv, index.max_level), -1, -1):
            cands = index._search_layer(q, qnorm, eps, p.ef_construction, layer)
            selected = index._select_heuristic(cands, p.M)
            neighbors[i][layer] = [n for _, n in selected]
            cap = p.M if layer > 0 else 2 * p.M
            for d_sel, n in selected:
                nlist = neighbors[n][layer]
                nlist.append(i)
                if len(nlist) > cap:
                    qn = float(store.norms[n]) if norms is not None else 0.0
                    dists = -_gather_scores(store, nlist, store.data[n], qn, metric)
                    pruned = index._select_heuristic(
                        [(float(d), other) for d, other in zip(dists, nlist)], cap
                    )
                    neighbors[n][layer] = [x for _, x in pruned]
            eps = cands
        if lv > index.max_level:
            index.entry = i
            index.max_level = lv
    return index


def hnsw_search(
    index: HnswIndex, q: QueryVector, k: int = 10, ef_search: int | None = None
) -> RankedList:
    """Approximate top-k. ef_search defaults to the build-time parameter and
    is clamped up to k; scores are exact metric values for the candidates."""
    if k < 1:
        raise ValueError("k must be >= 1")
    store = index.store
    qv = _as_query(q.vec, store.dim, q.qid)
    ef = max(ef_search if ef_search is not None else index.params.ef_search, k)
    qnorm = (
        math.sqrt(float((qv * qv).sum(dtype=np.float64))) if index.metric == "cosine" else 0.0
    )
    eps = [(index._dist_to(qv, qnorm, index.entry), index.entry)]
    for layer in range(index.max_level, 0, -1):
        eps = index._search_layer(qv, qnorm, eps, 1, layer)
    found = index._search_layer(qv, qnorm, eps, ef, 0)
    items = [(store.ids[n], -d) for d, n in found]
    return ranked_list_from_scores(q.qid, items, k=k)


# ---------------------------------------------------------------------------
# Batch search
# ---------------------------------------------------------------------------


def dense_batch_search(
    target: VectorStore | HnswIndex,
    queries: Iterable[QueryVector],
    k: int = 1000,
    threads: int = 1,
    metric: str = "inner_product",
    ef_search: int | None = None,
    tag: str = "ferret",
) -> Run:
    """One RankedList per query against a flat store or an HNSW index.

    Dimensions are validated up front so a bad query aborts by qid before
    any work runs. Output is independent of `threads`.
    """
    qs = list(queries)
    if isinstance(target, HnswIndex):
        dim = target.store.dim

        def one(q: QueryVector) -> RankedList:
            return hnsw_search(target, q, k, ef_search)

    else:
        dim = target.dim

        def one(q: QueryVector) -> RankedList:
            return flat_search(target, q, k, metric)

    for q in qs:
        _as_query(q.vec, dim, q.qid)
    if threads > 1 and len(qs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            lists = list(ex.map(one, qs))
    else:
        lists = [one(q) for q in qs]
    return Run(tag=tag, lists={rl.qid: rl for rl in lists})


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_dense_index(
    target: VectorStore | HnswIndex, out: str | Path, metric: str = "inner_product"
) -> Path:
    """Write a flat or HNSW index directory with a checksummed manifest."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if isinstance(target, HnswIndex):
        store, fmt, metric = target.store, HNSW_FORMAT, target.metric
    else:
        store, fmt = target, FLAT_FORMAT
        _check_metric(metric)
    files = {"vectors.bin": save_vectors(store, out_dir / "vectors.bin")}
    manifest: dict = {
        "format": fmt,
        "format_version": DENSE_FORMAT_VERSION,
        "metric": metric,
        "dim": store.dim,
        "count": store.count,
    }
    if isinstance(target, HnswIndex):
        with open(out_dir / "graph.bin", "wb") as fh:
            w = HashingWriter(fh)
            w.u32(target.entry)
            w.u32(target.max_level)
            w.u64(store.count)
            for node in range(store.count):
                per_layer = target.neighbors[node]
                w.u32(len(per_layer))
                for adj in per_layer:
                    w.u32(len(adj))
                    for nb in adj:
                        w.u32(nb)
            files["graph.bin"] = {"bytes": w.nbytes, "sha256": w.hexdigest()}
        p = target.params
        manifest["hnsw"] = {
            "M": p.M,
            "ef_construction": p.ef_construction,
            "ef_search": p.ef_search,
            "seed": p.seed,
        }
    else:
        graph = out_dir / "graph.bin"
        if graph.exists():
            graph.unlink()
    manifest["files"] = files
    with open(out_dir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_dir


def load_dense_index(path: str | Path) -> VectorStore | HnswIndex:
    """Open a dense index directory; returns the store (flat) or the graph
    index (hnsw) after checksum verification."""
    p = Path(path)
    manifest_path = p / "manifest.json"
    if not manifest_path.is_file():
        raise IndexLoadError(f"{p}: missing manifest.json")
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise IndexLoadError(f"{manifest_path}: corrupt manifest: {e.msg}") from e
    fmt = manifest.get("format")
    if fmt not in (FLAT_FORMAT, HNSW_FORMAT):
        raise IndexLoadError(f"{p}: not a dense index directory")
    if manifest.get("format_version") != DENSE_FORMAT_VERSION:
        raise IndexVersionError(
            f"{p}: format version {manifest.get('format_version')} not supported "
            f"(expected {DENSE_FORMAT_VERSION})"
        )
    for name, meta in manifest["files"].items():
        f = p / name
        if not f.is_file():
            raise IndexLoadError(f"{p}: missing segment file {name}")
        if f.stat().st_size != meta["bytes"] or sha256_file(f) != meta["sha256"]:
            raise IndexLoadError(f"{p}: segment {name} failed checksum verification")
    store = load_vectors(p / "vectors.bin")
    if store.dim != manifest["dim"] or store.count != manifest["count"]:
        raise IndexLoadError(f"{p}: manifest shape disagrees with vectors.bin")
    if fmt == FLAT_FORMAT:
        return store
    h = manifest["hnsw"]
    params = HnswParams(
        M=h["M"], ef_construction=h["ef_construction"], ef_search=h["ef_search"], seed=h["seed"]
    )
    blob = (p / "graph.bin").read_bytes()
    entry, max_level = struct.unpack_from("<II", blob, 0)
    (count,) = struct.unpack_from("<Q", blob, 8)
    if count != store.count:
        raise IndexLoadError(f"{p}: graph.bin node count disagrees with vectors.bin")
    off = 16
    neighbors: list[list[list[int]]] = []
    levels: list[int] = []
    for _ in range(count):
        (nlevels,) = struct.unpack_from("<I", blob, off)
        off += 4
        per_layer: list[list[int]] = []
        for _ in range(nlevels):
            (deg,) = struct.unpack_from("<I", blob, off)
            off += 4
            adj = list(struct.unpack_from(f"<{deg}I", blob, off))
            off += 4 * deg
            per_layer.append(adj)
        neighbors.append(per_layer)
        levels.append(nlevels - 1)
    return HnswIndex(
        store=store,
        params=params,
        metric=manifest["metric"],
        levels=levels,
        neighbors=neighbors,
        entry=entry,
        max_level=max_level,
    )
