import json
from pathlib import Path

import pytest
import torch
from fastapi.testclient import TestClient
from transformers import BertConfig, BertForMaskedLM, BertTokenizerFast

from mlm_sidecar.service import create_app

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
WORDS = [
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "call", "calls",
    "city", "consider", "considers", "experts", "for", "from", "group",
    "health", "in", "is", "it", "major", "many", "minor", "most", "new",
    "news", "now", "of", "officials", "only", "outbreak", "people",
    "population", "region", "remains", "reports", "risk", "say", "says",
    "sees", "serious", "small", "state", "still", "that", "the", "they",
    "this", "threat", "to", "today", "virus", "was", "we", "week", "with",
    ".", ",",
]


def build_tiny_checkpoint(target: Path) -> Path:
    """Random-initialized small BERT with a purpose-built WordPiece vocab."""
    target.mkdir(parents=True, exist_ok=True)
    vocab = {token: i for i, token in enumerate(SPECIALS + WORDS)}
    tokenizer = BertTokenizerFast(vocab=vocab, do_lower_case=True)
    tokenizer.save_pretrained(target)
    config = BertConfig(
        vocab_size=len(SPECIALS) + len(WORDS), hidden_size=64,
        num_hidden_layers=2, num_attention_heads=2, intermediate_size=128,
        max_position_embeddings=128)
    torch.manual_seed(0)
    model = BertForMaskedLM(config)
    model.save_pretrained(target)
    return target


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory) -> Path:
    return build_tiny_checkpoint(tmp_path_factory.mktemp("ckpt") / "tiny-bert")


def write_dataset(root: Path, dataset_id: str, sentences: list[str]):
    ds_dir = root / dataset_id
    ds_dir.mkdir(parents=True, exist_ok=True)
    with open(ds_dir / "sentences.jsonl", "w", encoding="utf-8") as f:
        for i, text in enumerate(sentences):
            f.write(json.dumps({"sent_id": f"{dataset_id}:{i:04d}", "doc_id": dataset_id,
                                "text": text, "tokens": text.split()}) + "\n")
    return ds_dir


MINOR_THREAT_SENTENCES = [
    "officials say it is a minor threat to the region .",
    "experts call it a minor threat to the population .",
    "the city considers the outbreak a minor threat .",
    "reports say the virus remains a minor threat .",
    "the state sees only a minor threat from the outbreak .",
    "many people call the virus a minor threat to health .",
    "the news says the outbreak is a minor threat now .",
    "this week officials consider it a minor threat .",
    "the group says the risk is a minor threat .",
    "we are told it was a minor threat to the city .",
    "the region reports a minor threat from the virus .",
    "most experts say the outbreak is still a minor threat .",
]


@pytest.fixture(scope="session")
def minor_corpus(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("data")
    write_dataset(root, "minor-threat", MINOR_THREAT_SENTENCES * 20)
    return root


@pytest.fixture()
def client(checkpoint, tmp_path, minor_corpus):
    app = create_app(checkpoint, adapters_dir=tmp_path / "adapters",
                     data_root=minor_corpus, model_tag="tiny-bert:test")
    return TestClient(app)
