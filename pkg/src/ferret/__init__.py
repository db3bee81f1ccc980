"""ferret: a self-contained first-stage retrieval toolkit.

Sparse BM25 retrieval over a positional inverted index, dense retrieval
(flat exact and HNSW approximate) over precomputed embeddings, hybrid
score fusion, test-collection management, evaluation metrics, and a
reproducible regression harness. Single-threaded and multi-threaded
execution produce byte-identical artifacts.
"""

__version__ = "0.1.0"

from .analysis import (
    AnalyzerConfig,
    PorterStemmer,
    Token,
    analyze,
    default_stopwords,
    load_stopwords,
    porter_stem,
    tokenize,
)
from .dense_search import (
    HnswIndex,
    HnswParams,
    QueryVector,
    VectorStore,
    dense_batch_search,
    flat_search,
    hnsw_build,
    hnsw_search,
    load_dense_index,
    load_query_vectors,
    load_vectors,
    save_dense_index,
    save_vectors,
)
from .errors import (
    CollectionError,
    DimensionMismatchError,
    FerretError,
    FileFormatError,
    IndexLoadError,
    IndexVersionError,
    NotStoredError,
    UnknownDocumentError,
)
from .evalkit import (
    EvalResult,
    Qrels,
    Topics,
    average_precision,
    evaluate_run,
    load_qrels,
    load_topics,
    mrr,
    parse_metric,
    read_run,
    recall,
    write_run,
)
from .hybrid import HybridParams, fuse, hybrid_batch
from .regression import (
    CheckSpec,
    RegressionResult,
    RegressionSpec,
    RunSpec,
    load_regression_spec,
    run_regression,
)
from .resources import cache_dir
from .results import RankedList, Run, ScoredDoc, check_ranked_list, ranked_list_from_scores
from .sparse_index import (
    CollectionStats,
    IndexBuildOptions,
    JsonDocument,
    Posting,
    SparseIndexHandle,
    TermRecord,
    build_index,
    ingest,
    load_index,
)
from .sparse_search import (
    Bm25Params,
    TunePoint,
    TuneResult,
    aggregate_max_passage,
    batch_search,
    bm25_score,
    fetch_doc,
    reader_bm25_weight,
    reader_doc_vector,
    reader_postings,
    reader_term_counts,
    reader_term_positions,
    reader_terms,
    search,
    tune_grid,
)

__all__ = [name for name in dir() if not name.startswith("_")]
