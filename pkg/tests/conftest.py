import datetime as dt
import json
from pathlib import Path

import pytest

from mediadiet.corpus import (
    CorpusManifest,
    MediaDietDataset,
    SentenceRecord,
    ingest_documents,
    read_documents_jsonl,
)

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


def toy_manifest_header(dataset_id="toy", outlet="CNN", medium="web") -> CorpusManifest:
    return CorpusManifest(
        dataset_id=dataset_id, outlet=outlet, medium=medium, topic="local",
        window_start=dt.date(2020, 3, 1), window_end=dt.date(2020, 3, 31))


@pytest.fixture(scope="session")
def toy_docs_path() -> Path:
    return DATA_DIR / "toy_corpus" / "docs.jsonl"


@pytest.fixture(scope="session")
def toy_dataset(toy_docs_path) -> MediaDietDataset:
    result = ingest_documents(read_documents_jsonl(toy_docs_path), toy_manifest_header())
    return result.dataset


def dataset_from_sentences(sentences: list[str], dataset_id="mini",
                           outlet="CNN", medium="web") -> MediaDietDataset:
    """Build an in-memory dataset straight from tokenized sentence strings."""
    from mediadiet.text import tokenize
    records = [
        SentenceRecord(sent_id=f"d0:{i:04d}", doc_id="d0", text=s,
                       tokens=tuple(tokenize(s)))
        for i, s in enumerate(sentences)
    ]
    return MediaDietDataset(manifest=toy_manifest_header(dataset_id, outlet, medium),
                            sentences=records)


@pytest.fixture(scope="session")
def segmentation_cases() -> list[dict]:
    with open(DATA_DIR / "segmentation_cases.json", encoding="utf-8") as f:
        return json.load(f)
