"""Dated, source/medium-tagged corpora of segmented, tokenized sentences.

Storage layout per dataset: ``manifest.json`` plus ``sentences.jsonl`` (one
sentence record per line), which is diff-able and streamable. Ingestion
consumes a JSONL stream of documents with fields
``doc_id, outlet, medium, published_at, title, body``.
"""

import dataclasses
import datetime as dt
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import MalformedRecordError, MediaDietError
from .text import split_sentences, tokenize

log = logging.getLogger(__name__)

MEDIUMS = ("web", "tv", "radio")

MANIFEST_FILE = "manifest.json"
SENTENCES_FILE = "sentences.jsonl"


@dataclass(frozen=True)
class CorpusManifest:
    dataset_id: str
    outlet: str
    medium: str
    topic: str
    window_start: dt.date
    window_end: dt.date
    doc_count: int = 0
    sentence_count: int = 0

    def __post_init__(self):
        if self.medium not in MEDIUMS:
            raise MediaDietError(f"medium must be one of {MEDIUMS}, got {self.medium!r}")
        if self.window_start > self.window_end:
            raise MediaDietError("window_start must be <= window_end")

    def to_json_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["window_start"] = self.window_start.isoformat()
        d["window_end"] = self.window_end.isoformat()
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "CorpusManifest":
        return cls(
            dataset_id=d["dataset_id"],
            outlet=d["outlet"],
            medium=d["medium"],
            topic=d["topic"],
            window_start=dt.date.fromisoformat(d["window_start"]),
            window_end=dt.date.fromisoformat(d["window_end"]),
            doc_count=int(d["doc_count"]),
            sentence_count=int(d["sentence_count"]),
        )


@dataclass(frozen=True)
class Document:
    doc_id: str
    outlet: str
    medium: str
    published_at: dt.date
    title: str
    body: str


@dataclass(frozen=True)
class SentenceRecord:
    sent_id: str
    doc_id: str
    text: str
    tokens: tuple[str, ...]


@dataclass
class MediaDietDataset:
    """A manifest plus its sentences, iterated in stable (doc_id, index) order."""

    manifest: CorpusManifest
    sentences: list[SentenceRecord] = field(default_factory=list)

    def __post_init__(self):
        self.sentences = sorted(self.sentences, key=lambda s: (s.doc_id, s.sent_id))

    def __len__(self) -> int:
        return len(self.sentences)

    def iter_token_lists(self) -> Iterator[list[str]]:
        for s in self.sentences:
            yield list(s.tokens)

    def save(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / MANIFEST_FILE, "w", encoding="utf-8") as f:
            json.dump(self.manifest.to_json_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        with open(directory / SENTENCES_FILE, "w", encoding="utf-8") as f:
            for s in self.sentences:
                rec = {"sent_id": s.sent_id, "doc_id": s.doc_id,
                       "text": s.text, "tokens": list(s.tokens)}
                f.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
        return directory

    @classmethod
    def load(cls, directory: str | Path) -> "MediaDietDataset":
        directory = Path(directory)
        with open(directory / MANIFEST_FILE, encoding="utf-8") as f:
            manifest = CorpusManifest.from_json_dict(json.load(f))
        sentences = []
        with open(directory / SENTENCES_FILE, encoding="utf-8") as f:
            for i, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    d = json.loads(line)
                    sentences.append(SentenceRecord(
                        sent_id=d["sent_id"], doc_id=d["doc_id"],
                        text=d["text"], tokens=tuple(d["tokens"])))
                except (json.JSONDecodeError, KeyError) as e:
                    raise MalformedRecordError(i, f"bad sentence record: {e}")
        return cls(manifest=manifest, sentences=sentences)


@dataclass
class IngestReport:
    skipped_outside_window: int = 0
    skipped_keyword_filter: int = 0
    malformed: int = 0
    warnings: list[str] = field(default_factory=list)


@dataclass
class IngestResult:
    dataset: MediaDietDataset
    report: IngestReport

    @property
    def manifest(self) -> CorpusManifest:
        return self.dataset.manifest


def segment_document(doc: Document) -> list[SentenceRecord]:
    """Segment and tokenize one document body; empty-token sentences are dropped."""
    records = []
    idx = 0
    for text in split_sentences(doc.body):
        tokens = tuple(tokenize(text))
        if not tokens:
            continue
        records.append(SentenceRecord(
            sent_id=f"{doc.doc_id}:{idx:04d}", doc_id=doc.doc_id,
            text=text, tokens=tokens))
        idx += 1
    return records


def parse_document_line(line: str, line_number: int) -> Document:
    try:
        d = json.loads(line)
    except json.JSONDecodeError as e:
        raise MalformedRecordError(line_number, f"invalid JSON: {e.msg}")
    try:
        return Document(
            doc_id=str(d["doc_id"]),
            outlet=str(d["outlet"]),
            medium=str(d["medium"]),
            published_at=dt.date.fromisoformat(d["published_at"]),
            title=str(d.get("title", "")),
            body=str(d["body"]),
        )
    except KeyError as e:
        raise MalformedRecordError(line_number, f"missing field {e.args[0]!r}")
    except ValueError as e:
        raise MalformedRecordError(line_number, f"bad value: {e}")


def read_documents_jsonl(path: str | Path) -> Iterator[Document]:
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f, start=1):
            if not line.strip():
                continue
            yield parse_document_line(line, i)


def ingest_documents(
    documents: Iterable[Document],
    header: CorpusManifest,
    keywords: list[str] | None = None,
) -> IngestResult:
    """Build a dataset from a document stream.

    Documents published outside the manifest window are rejected and counted
    in the report. When ``keywords`` is given, only documents whose title or
    body contains at least one keyword (case-insensitive) are kept; the rest
    are counted separately. Duplicate doc_ids are an error.
    """
    kw = [k.lower() for k in keywords] if keywords else None
    report = IngestReport()
    sentences: list[SentenceRecord] = []
    seen_ids: set[str] = set()
    doc_count = 0
    for doc in documents:
        if doc.doc_id in seen_ids:
            raise MediaDietError(f"duplicate doc_id {doc.doc_id!r} in dataset "
                                 f"{header.dataset_id!r}")
        seen_ids.add(doc.doc_id)
        if not (header.window_start <= doc.published_at <= header.window_end):
            report.skipped_outside_window += 1
            continue
        if kw is not None:
            haystack = (doc.title + "\n" + doc.body).lower()
            if not any(k in haystack for k in kw):
                report.skipped_keyword_filter += 1
                continue
        sentences.extend(segment_document(doc))
        doc_count += 1
    if doc_count == 0:
        report.warnings.append("ingest produced an empty dataset")
        log.warning("dataset %s: ingest produced an empty dataset", header.dataset_id)
    manifest = dataclasses.replace(header, doc_count=doc_count,
                                   sentence_count=len(sentences))
    return IngestResult(dataset=MediaDietDataset(manifest=manifest, sentences=sentences),
                        report=report)
