"""Trace model answers back to training sentences by embedding similarity.

Exact brute-force cosine scan over every sentence in the dataset; no
approximate index. Dataset embeddings are cached on disk per
(dataset_id, model_tag) so repeated queries only embed the query itself.
"""

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import gateway
from .corpus import MediaDietDataset
from .errors import MediaDietError

log = logging.getLogger(__name__)

EMBED_BATCH = 32  # fixed so replay-cache keys are stable
POOLING = "mean"  # what the sidecar applies; recorded in output metadata


@dataclass
class NeighborResult:
    query_text: str
    neighbors: list  # (sent_id, doc_id, text, cosine) sorted desc, ties by sent_id
    k: int
    model_tag: str
    pooling: str = POOLING

    def to_json_dict(self) -> dict:
        return {
            "query_text": self.query_text, "k": self.k,
            "model_tag": self.model_tag, "pooling": self.pooling,
            "neighbors": [{"sent_id": s, "doc_id": d, "text": t, "cosine": c}
                          for s, d, t, c in self.neighbors],
        }

    def save_json(self, path: str | Path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_dict(), f, indent=2, ensure_ascii=False)
            f.write("\n")


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return mat / norms


def _cache_path(cache_dir: Path, dataset_id: str, model_tag: str) -> Path:
    safe = re.sub(r"[^\w.+-]", "_", f"{dataset_id}__{model_tag}")
    return cache_dir / f"{safe}.npz"


def embed_dataset(dataset: MediaDietDataset, backend, cache_dir=None,
                  client=None) -> tuple[list[str], np.ndarray, str]:
    """Embeddings for every sentence, batched; cached per (dataset, model_tag)."""
    sent_ids = [s.sent_id for s in dataset.sentences]
    texts = [s.text for s in dataset.sentences]
    tag = gateway._as_backend(backend, client).model_tag
    cache_file = None
    if cache_dir is not None and tag:
        cache_file = _cache_path(Path(cache_dir), dataset.manifest.dataset_id, tag)
        if cache_file.exists():
            stored = np.load(cache_file, allow_pickle=False)
            if list(stored["sent_ids"]) == sent_ids:
                return sent_ids, stored["vectors"], str(stored["model_tag"])
            log.warning("embedding cache %s is stale; recomputing", cache_file)
    vectors = []
    seen_tag = ""
    for start in range(0, len(texts), EMBED_BATCH):
        resp = gateway.embed_sentences(backend, texts[start:start + EMBED_BATCH],
                                       client=client)
        vectors.extend(resp.vectors)
        seen_tag = resp.model_tag
    mat = np.asarray(vectors, dtype=float)
    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        np.savez(cache_file, sent_ids=np.array(sent_ids), vectors=mat,
                 model_tag=np.array(seen_tag))
    return sent_ids, mat, seen_tag


def nearest_training_sentences(filled_prompt: str, dataset: MediaDietDataset,
                               backend, k: int = 10, cache_dir=None,
                               client=None) -> NeighborResult:
    """Exact top-k cosine neighbors of the filled prompt among dataset sentences."""
    if k < 1:
        raise MediaDietError("k must be >= 1")
    if len(dataset) == 0:
        raise MediaDietError("dataset has no sentences to search")
    sent_ids, mat, tag = embed_dataset(dataset, backend, cache_dir=cache_dir,
                                       client=client)
    query = gateway.embed_sentences(backend, [filled_prompt], client=client)
    qv = np.asarray(query.vectors[0], dtype=float)
    qn = np.linalg.norm(qv)
    sims = _unit_rows(mat) @ (qv / qn if qn > 0 else qv)
    sims = np.clip(sims, -1.0, 1.0)
    order = sorted(range(len(sent_ids)), key=lambda i: (-sims[i], sent_ids[i]))
    picked = order[:k]
    by_id = {s.sent_id: s for s in dataset.sentences}
    neighbors = [(sent_ids[i], by_id[sent_ids[i]].doc_id, by_id[sent_ids[i]].text,
                  float(sims[i])) for i in picked]
    return NeighborResult(query_text=filled_prompt, neighbors=neighbors, k=k,
                          model_tag=tag or query.model_tag)


def neighbors_to_csv(result: NeighborResult, path: str | Path):
    import pandas as pd
    df = pd.DataFrame(result.neighbors,
                      columns=["sent_id", "doc_id", "text", "cosine"])
    df.insert(0, "query_text", result.query_text)
    df["model_tag"] = result.model_tag
    df["pooling"] = result.pooling
    df.to_csv(path, index=False, lineterminator="\n")
