from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from laybench.corpus import Corpus, load_jsonl, synthetic_corpus_path
from laybench.llmgate import Gateway, MockBackend


@pytest.fixture(scope="session")
def synthetic_corpus() -> Corpus:
    return load_jsonl(synthetic_corpus_path(), name="synthetic")


@pytest.fixture
def mock_gateway(tmp_path) -> Gateway:
    return Gateway(MockBackend(seed=7), cache_dir=tmp_path / "cache")


@pytest.fixture
def uncached_gateway() -> Gateway:
    return Gateway(MockBackend(seed=7))
