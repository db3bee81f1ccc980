"""JSON collection ingestion and the positional inverted index.

The on-disk layout is a single immutable segment per build:

    manifest.json    format version, analyzer config, build options,
                     collection stats, per-file sizes and SHA-256 checksums
    docids.bin       u64 count, then external docid strings in ordinal order
    doclens.bin      u64 count, then u32 analyzed length per doc
    terms.bin        u64 count, then per term (sorted): term string, u32 df,
                     u64 cf, u64 postings offset, u64 postings byte length
    postings.bin     per term: df x [u32 doc ordinal, u32 tf,
                     tf x u32 positions (iff store_positions)]
    docvectors.bin   (iff store_docvectors) u64 count, count x u64 offsets,
                     then per doc: u32 nterms, nterms x [u32 term_id, u32 tf,
                     tf x u32 positions (iff store_positions)]
    stored.bin       (iff store_raw) u64 count, count x u64 offsets, then per
                     doc: u8 has_raw, contents string, raw string

All integers little-endian. Builds are byte-identical for identical inputs
and options regardless of thread count; the manifest contains no timestamps
or absolute paths.
"""

from __future__ import annotations

import json
import mmap
from array import array
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

from ._binio import HashingWriter, Reader, sha256_file
from .analysis import AnalyzerConfig, Token, analyze
from .errors import (
    CollectionError,
    IndexLoadError,
    IndexVersionError,
    NotStoredError,
    UnknownDocumentError,
)

FORMAT_NAME = "ferret-sparse-index"
FORMAT_VERSION = 1

_SEGMENT_NAMES = (
    "docids.bin",
    "doclens.bin",
    "terms.bin",
    "postings.bin",
    "docvectors.bin",
    "stored.bin",
)


@dataclass(frozen=True)
class JsonDocument:
    """One record of the JSON collection format: required `id` and
    `contents`, optional `raw` kept verbatim."""

    id: str
    contents: str
    raw: str | None = None


class Posting(NamedTuple):
    doc: int
    tf: int
    positions: tuple[int, ...] | None


class TermRecord(NamedTuple):
    term: str
    df: int
    cf: int


@dataclass(frozen=True)
class CollectionStats:
    doc_count: int
    total_terms: int
    avg_doc_length: float
    doc_lengths: array

    def doc_length(self, ordinal: int) -> int:
        return self.doc_lengths[ordinal]


@dataclass(frozen=True)
class IndexBuildOptions:
    store_positions: bool = True
    store_docvectors: bool = True
    store_raw: bool = True
    analyzer: AnalyzerConfig = field(default_factory=AnalyzerConfig)
    threads: int = 1

    def __post_init__(self) -> None:
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def _validate_record(obj, where: str) -> JsonDocument:
    if not isinstance(obj, dict):
        raise CollectionError(f"{where}: record is not a JSON object")
    docid = obj.get("id")
    if not isinstance(docid, str) or not docid:
        raise CollectionError(f"{where}: record is missing a non-empty string 'id'")
    contents = obj.get("contents")
    if not isinstance(contents, str):
        raise CollectionError(f"{where}: record {docid!r} is missing string 'contents'")
    raw = obj.get("raw")
    if raw is not None and not isinstance(raw, str):
        raise CollectionError(f"{where}: record {docid!r} has non-string 'raw'")
    return JsonDocument(id=docid, contents=contents, raw=raw)


def ingest(path: str | Path) -> Iterator[JsonDocument]:
    """Yield documents from a `.json`/`.jsonl` file or a directory of them.

    Order is deterministic: lexicographic file order, then in-file order.
    Directories are not recursed.
    """
    p = Path(path)
    if p.is_file():
        files = [p]
    elif p.is_dir():
        files = sorted(f for f in p.iterdir() if f.is_file() and f.suffix in (".json", ".jsonl"))
        if not files:
            raise CollectionError(f"{p}: no .json or .jsonl files found")
    else:
        raise CollectionError(f"{p}: no such file or directory")

    for f in files:
        if f.suffix == ".jsonl":
            with open(f, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    try:
                        obj = json.loads(line)
                    except json.JSONDecodeError as e:
                        raise CollectionError(f"{f}: line {lineno}: {e.msg}") from e
                    yield _validate_record(obj, f"{f}: line {lineno}")
        else:
            try:
                with open(f, encoding="utf-8") as fh:
                    data = json.load(fh)
            except json.JSONDecodeError as e:
                raise CollectionError(f"{f}: line {e.lineno}: {e.msg}") from e
            records = data if isinstance(data, list) else [data]
            for i, obj in enumerate(records):
                yield _validate_record(obj, f"{f}: record {i}")


# ---------------------------------------------------------------------------
# Build
# ---------------------------------------------------------------------------


def _chunks(it: Iterable, size: int) -> Iterator[list]:
    chunk = []
    for item in it:
        chunk.append(item)
        if len(chunk) >= size:
            yield chunk
            chunk = []
    if chunk:
        yield chunk


def _count_terms(tokens: list[Token]) -> dict[str, list[int]]:
    """term -> sorted position list (positions are pre-filter ordinals)."""
    counted: dict[str, list[int]] = {}
    for term, pos in tokens:
        counted.setdefault(term, []).append(pos)
    return counted


def build_index(
    docs: Iterable[JsonDocument],
    opts: IndexBuildOptions,
    out: str | Path,
) -> "SparseIndexHandle":
    """Build a single immutable index segment under `out` and return a handle.

    Documents may be analyzed in parallel (`opts.threads`), but the merge is
    ordinal-ordered so the output is independent of the thread count.
    """
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    docids: list[str] = []
    seen: set[str] = set()
    doclens = array("I")
    # per-doc analyzed term map, retained for docvectors and postings
    doc_terms: list[dict[str, list[int]]] = []
    stored: list[tuple[str, str | None]] = []

    cfg = opts.analyzer
    executor = ThreadPoolExecutor(max_workers=opts.threads) if opts.threads > 1 else None
    try:
        for chunk in _chunks(docs, 1024):
            texts = [d.contents for d in chunk]
            if executor is not None:
                analyzed = list(executor.map(lambda t: analyze(t, cfg), texts))
            else:
                analyzed = [analyze(t, cfg) for t in texts]
            for doc, tokens in zip(chunk, analyzed):
                if doc.id in seen:
                    raise CollectionError(f"duplicate docid {doc.id!r}")
                seen.add(doc.id)
                docids.append(doc.id)
                doclens.append(len(tokens))
                doc_terms.append(_count_terms(tokens))
                if opts.store_raw:
                    stored.append((doc.contents, doc.raw))
    finally:
        if executor is not None:
            executor.shutdown()

    if not docids:
        raise CollectionError("empty collection: no documents to index")

    # invert: term -> [(ordinal, positions)], ordinal-sorted by construction
    postings: dict[str, list[tuple[int, list[int]]]] = {}
    for ordinal, counted in enumerate(doc_terms):
        for term, positions in counted.items():
            postings.setdefault(term, []).append((ordinal, positions))
    sorted_terms = sorted(postings)
    term_ids = {term: i for i, term in enumerate(sorted_terms)}

    files: dict[str, dict] = {}

    def _open(name: str):
        return open(out_dir / name, "wb")

    with _open("docids.bin") as fh:
        w = HashingWriter(fh)
        w.u64(len(docids))
        for docid in docids:
            w.string(docid)
        files["docids.bin"] = {"bytes": w.nbytes, "sha256": w.hexdigest()}

    with _open("doclens.bin") as fh:
        w = HashingWriter(fh)
        w.u64(len(doclens))
        for dl in doclens:
            w.u32(dl)
        files["doclens.bin"] = {"bytes": w.nbytes, "sha256": w.hexdigest()}

    # postings first so terms.bin can record offsets
    offsets: list[tuple[int, int]] = []
    with _open("postings.bin") as fh:
        w = HashingWriter(fh)
        for term in sorted_terms:
            start = w.nbytes
            for ordinal, positions in postings[term]:
                w.u32(ordinal)
                w.u32(len(positions))
                if opts.store_positions:
                    for pos in positions:
                        w.u32(pos)
            offsets.append((start, w.nbytes - start))
        files["postings.bin"] = {"bytes": w.nbytes, "sha256": w.hexdigest()}

    with _open("terms.bin") as fh:
        w = HashingWriter(fh)
        w.u64(len(sorted_terms))
        for term, (off, nbytes) in zip(sorted_terms, offsets):
            plist = postings[term]
            w.string(term)
            w.u32(len(plist))
            w.u64(sum(len(p) for _, p in plist))
            w.u64(off)
            w.u64(nbytes)
        files["terms.bin"] = {"bytes": w.nbytes, "sha256": w.hexdigest()}

    if opts.store_docvectors:
        blocks: list[bytes] = []
        for counted in doc_terms:
            w_entries = sorted((term_ids[t], ps) for t, ps in counted.items())
            parts = [len(w_entries).to_bytes(4, "little")]
            for tid, ps in w_entries:
                parts.append(tid.to_bytes(4, "little"))
                parts.append(len(ps).to_bytes(4, "little"))
                if opts.store_positions:
                    parts.extend(pos.to_bytes(4, "little") for pos in ps)
            blocks.append(b"".join(parts))
        files["docvectors.bin"] = _write_offset_table(out_dir / "docvectors.bin", blocks)

    if opts.store_raw:
        blocks = []
        for contents, raw in stored:
            parts = [bytes([1 if raw is not None else 0])]
            for s in (contents, raw or ""):
                enc = s.encode("utf-8")
                parts.append(len(enc).to_bytes(4, "little"))
                parts.append(enc)
            blocks.append(b"".join(parts))
        files["stored.bin"] = _write_offset_table(out_dir / "stored.bin", blocks)

    # stale segments from a previous build must not linger
    for name in _SEGMENT_NAMES:
        if name not in files and (out_dir / name).exists():
            (out_dir / name).unlink()

    total_terms = int(sum(doclens))
    manifest = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "analyzer": cfg.to_dict(),
        # threads is deliberately not recorded: the artifact must not depend
        # on how the build was parallelized
        "options": {
            "store_positions": opts.store_positions,
            "store_docvectors": opts.store_docvectors,
            "store_raw": opts.store_raw,
        },
        "stats": {
            "doc_count": len(docids),
            "total_terms": total_terms,
            "avg_doc_length": total_terms / len(docids),
            "term_count": len(sorted_terms),
        },
        "files": files,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return load_index(out_dir)


def _write_offset_table(path: Path, blocks: list[bytes]) -> dict:
    """u64 count, count x u64 absolute offsets, then the blocks."""
    with open(path, "wb") as fh:
        w = HashingWriter(fh)
        w.u64(len(blocks))
        pos = 8 + 8 * len(blocks)
        for b in blocks:
            w.u64(pos)
            pos += len(b)
        for b in blocks:
            w.write(b)
        return {"bytes": w.nbytes, "sha256": w.hexdigest()}


# ---------------------------------------------------------------------------
# Load and read
# ---------------------------------------------------------------------------


class SparseIndexHandle:
    """Read-only view over a built index. Immutable after load; safe for
    unrestricted concurrent readers. Acts as a context manager."""

    def __init__(self, path: Path, manifest: dict):
        self.path = path
        self.manifest = manifest
        self.analyzer = AnalyzerConfig.from_dict(manifest["analyzer"])
        o = manifest["options"]
        self.store_positions: bool = o["store_positions"]
        self.store_docvectors: bool = o["store_docvectors"]
        self.store_raw: bool = o["store_raw"]

        self._mmaps: list = []
        self._files: list = []

        r = Reader(self._map("docids.bin"))
        n = r.u64()
        self.docids: list[str] = [r.string() for _ in range(n)]
        self._ordinals = {docid: i for i, docid in enumerate(self.docids)}

        r = Reader(self._map("doclens.bin"))
        n = r.u64()
        doclens = array("I", r.u32_array(n))
        total = int(sum(doclens))
        self.stats = CollectionStats(
            doc_count=n,
            total_terms=total,
            avg_doc_length=total / n,
            doc_lengths=doclens,
        )
        s = manifest["stats"]
        if s["doc_count"] != n or s["total_terms"] != total:
            raise IndexLoadError(f"{path}: manifest stats disagree with doclens.bin")

        r = Reader(self._map("terms.bin"))
        nterms = r.u64()
        self.sorted_terms: list[str] = []
        self._terms: dict[str, tuple[int, int, int, int]] = {}
        for _ in range(nterms):
            term = r.string()
            df, cf, off, nbytes = r.u32(), r.u64(), r.u64(), r.u64()
            self.sorted_terms.append(term)
            self._terms[term] = (df, cf, off, nbytes)

        self._postings_buf = self._map("postings.bin")
        self._docvec_buf = self._map("docvectors.bin") if self.store_docvectors else None
        self._stored_buf = self._map("stored.bin") if self.store_raw else None

    def _map(self, name: str):
        fh = open(self.path / name, "rb")
        self._files.append(fh)
        size = fh.seek(0, 2)
        if size == 0:
            return b""
        mm = mmap.mmap(fh.fileno(), 0, access=mmap.ACCESS_READ)
        self._mmaps.append(mm)
        return mm

    # -- lifecycle ---------------------------------------------------------

    def close(self) -> None:
        for mm in self._mmaps:
            mm.close()
        for fh in self._files:
            fh.close()
        self._mmaps.clear()
        self._files.clear()

    def __enter__(self) -> "SparseIndexHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- docid mapping -----------------------------------------------------

    def external_id(self, ordinal: int) -> str:
        return self.docids[ordinal]

    def ordinal(self, docid: str) -> int:
        try:
            return self._ordinals[docid]
        except KeyError:
            raise UnknownDocumentError(f"unknown docid {docid!r}") from None

    # -- dictionary and postings -------------------------------------------

    def term_count(self) -> int:
        return len(self.sorted_terms)

    def term_stats(self, term: str) -> TermRecord | None:
        rec = self._terms.get(term)
        if rec is None:
            return None
        return TermRecord(term, rec[0], rec[1])

    def iter_terms(self) -> Iterator[TermRecord]:
        for term in self.sorted_terms:
            df, cf, _, _ = self._terms[term]
            yield TermRecord(term, df, cf)

    def postings(self, term: str) -> list[Posting]:
        """Decode a term's postings; positions are None when not stored."""
        rec = self._terms.get(term)
        if rec is None:
            return []
        df, _, off, _ = rec
        r = Reader(self._postings_buf, off)
        out = []
        for _ in range(df):
            ordinal = r.u32()
            tf = r.u32()
            positions = r.u32_array(tf) if self.store_positions else None
            out.append(Posting(ordinal, tf, positions))
        return out

    # -- forward index -----------------------------------------------------

    def doc_vector(self, ordinal: int) -> list[tuple[str, int, tuple[int, ...] | None]]:
        """(term, tf, positions) entries for one document, term-sorted."""
        if not self.store_docvectors:
            raise NotStoredError("docvectors not stored: rebuild with store_docvectors")
        r = Reader(self._docvec_buf, 8 + 8 * ordinal)
        r = Reader(self._docvec_buf, r.u64())
        nterms = r.u32()
        out = []
        for _ in range(nterms):
            tid = r.u32()
            tf = r.u32()
            positions = r.u32_array(tf) if self.store_positions else None
            out.append((self.sorted_terms[tid], tf, positions))
        return out

    # -- stored text ---------------------------------------------------------

    def stored_text(self, ordinal: int) -> tuple[str, str | None]:
        """(contents, raw) as ingested; raw is None when absent."""
        if not self.store_raw:
            raise NotStoredError("document text not stored: rebuild with store_raw")
        r = Reader(self._stored_buf, 8 + 8 * ordinal)
        r = Reader(self._stored_buf, r.u64())
        has_raw = self._stored_buf[r.pos]
        r.pos += 1
        contents = r.string()
        raw = r.string()
        return contents, (raw if has_raw else None)


def load_index(path: str | Path, verify_checksums: bool = True) -> SparseIndexHandle:
    """Open an index directory, verifying the manifest and segment checksums."""
    p = Path(path)
    manifest_path = p / "manifest.json"
    if not manifest_path.is_file():
        raise IndexLoadError(f"{p}: missing manifest.json")
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise IndexLoadError(f"{manifest_path}: corrupt manifest: {e.msg}") from e
    if manifest.get("format") != FORMAT_NAME:
        raise IndexLoadError(f"{p}: not a {FORMAT_NAME} directory")
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise IndexVersionError(
            f"{p}: format version {version} not supported (expected {FORMAT_VERSION})"
        )
    for name, meta in manifest["files"].items():
        f = p / name
        if not f.is_file():
            raise IndexLoadError(f"{p}: missing segment file {name}")
        if f.stat().st_size != meta["bytes"]:
            raise IndexLoadError(f"{p}: segment {name} has wrong size")
        if verify_checksums and sha256_file(f) != meta["sha256"]:
            raise IndexLoadError(f"{p}: segment {name} failed checksum verification")
    return SparseIndexHandle(p, manifest)
