"""Exception hierarchy. The CLI maps these onto exit codes: usage errors are
reported by the parser itself (exit 1), FerretError means bad data (exit 2),
and OSError means I/O trouble (exit 3)."""


class FerretError(Exception):
    """Base class for all toolkit errors."""


class CollectionError(FerretError):
    """Malformed or inconsistent input documents (ingest/build time)."""


class IndexLoadError(FerretError):
    """Missing or corrupt index segment files."""


class IndexVersionError(IndexLoadError):
    """Index was written with an unsupported format version."""


class NotStoredError(FerretError):
    """A read requires data the index was built without (positions,
    document vectors, or stored text)."""


class UnknownDocumentError(FerretError):
    """Lookup of a docid the index does not contain."""


class DimensionMismatchError(FerretError):
    """Vector length does not match the store/index dimension."""


class FileFormatError(FerretError):
    """Malformed topics, qrels, run, or vector files."""
