import pytest

from ferret.analysis import AnalyzerConfig
from ferret.sparse_index import IndexBuildOptions, JsonDocument, build_index, ingest

from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"

TOY_DOCS = [
    JsonDocument("d1", "a cat"),
    JsonDocument("d2", "cat cat dog"),
    JsonDocument("d3", "dog"),
]


@pytest.fixture(scope="session")
def toy_index(tmp_path_factory):
    """The 3-doc corpus with a pass-through analyzer; hand counts:
    a (df=1, cf=1), cat (df=2, cf=3), dog (df=2, cf=2), avgdl=2."""
    out = tmp_path_factory.mktemp("toy_index")
    opts = IndexBuildOptions(analyzer=AnalyzerConfig.no_op())
    handle = build_index(TOY_DOCS, opts, out)
    yield handle
    handle.close()


@pytest.fixture(scope="session")
def fixture_index(tmp_path_factory):
    """The 6-doc fixture corpus under the default analyzer."""
    out = tmp_path_factory.mktemp("fixture_index")
    handle = build_index(ingest(FIXTURES / "corpus.jsonl"), IndexBuildOptions(), out)
    yield handle
    handle.close()


@pytest.fixture
def fixtures_dir():
    return FIXTURES
