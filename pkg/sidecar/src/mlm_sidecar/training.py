"""Adapter finetuning with the masked-language-modeling objective.

Only adapter parameters receive gradients; the base weights stay frozen and
untouched. Deterministic under a fixed seed on CPU.
"""

import json
import logging
import threading
from pathlib import Path

import torch
from torch import nn

from .adapters import AdapterRecord, AdapterSet, now_iso
from .modeling import MAX_SEQ_LEN, MaskedLM, _encoder_layers

log = logging.getLogger(__name__)

DEFAULT_EPOCHS = 20
DEFAULT_LR = 1e-4
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
BATCH_SIZE = 16
MASK_PROB = 0.15

_finetune_lock = threading.Lock()  # one finetune at a time per process


def load_dataset_sentences(data_root: str | Path, dataset_id: str) -> list[str]:
    """Sentences from a media-diet dataset directory (sentences.jsonl)."""
    path = Path(data_root) / dataset_id / "sentences.jsonl"
    if not path.exists():
        raise FileNotFoundError(f"dataset {dataset_id!r}: no {path}")
    sentences = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                sentences.append(json.loads(line)["text"])
    if not sentences:
        raise FileNotFoundError(f"dataset {dataset_id!r} is empty")
    return sentences


def _mask_tokens(input_ids, special_mask, tokenizer, generator):
    """Standard 80/10/10 MLM corruption; labels are -100 off the masked slots."""
    labels = input_ids.clone()
    probs = torch.full(input_ids.shape, MASK_PROB)
    probs.masked_fill_(special_mask, 0.0)
    masked = torch.bernoulli(probs, generator=generator).bool()
    labels[~masked] = -100
    replace = torch.bernoulli(torch.full(input_ids.shape, 0.8),
                              generator=generator).bool() & masked
    input_ids[replace] = tokenizer.mask_token_id
    random_tok = torch.bernoulli(torch.full(input_ids.shape, 0.5),
                                 generator=generator).bool() & masked & ~replace
    random_ids = torch.randint(len(tokenizer), input_ids.shape,
                               generator=generator)
    input_ids[random_tok] = random_ids[random_tok]
    return input_ids, labels


def finetune_adapter(lm: MaskedLM, adapter_id: str, dataset_id: str,
                     sentences: list[str], epochs: int = DEFAULT_EPOCHS,
                     learning_rate: float = DEFAULT_LR, beta1: float = DEFAULT_BETA1,
                     beta2: float = DEFAULT_BETA2, seed: int = 0) -> AdapterRecord:
    """Train a fresh adapter on the dataset and persist it to the store.

    epochs=0 stores the zero-initialized adapter, a behavioral no-op.
    """
    if lm.store is None:
        raise RuntimeError("sidecar has no adapter store configured")
    with _finetune_lock:
        torch.manual_seed(seed)
        generator = torch.Generator().manual_seed(seed)
        adapters = AdapterSet(lm.n_layers, lm.hidden_size)
        adapters.train()
        adapters.attach(_encoder_layers(lm.model))
        try:
            lm.model.train(False)  # keep dropout off; only adapters learn
            optimizer = torch.optim.Adam(adapters.parameters(), lr=learning_rate,
                                         betas=(beta1, beta2))
            loss_fn = nn.CrossEntropyLoss()
            enc = lm.tokenizer(sentences, padding=True, truncation=True,
                               max_length=MAX_SEQ_LEN, return_tensors="pt")
            special = torch.tensor([
                lm.tokenizer.get_special_tokens_mask(row, already_has_special_tokens=True)
                for row in enc["input_ids"].tolist()], dtype=torch.bool)
            special |= enc["attention_mask"] == 0
            n = enc["input_ids"].shape[0]
            for epoch in range(epochs):
                order = torch.randperm(n, generator=generator)
                epoch_loss = 0.0
                for start in range(0, n, BATCH_SIZE):
                    idx = order[start:start + BATCH_SIZE]
                    input_ids, labels = _mask_tokens(
                        enc["input_ids"][idx].clone(), special[idx], lm.tokenizer,
                        generator)
                    if (labels != -100).sum() == 0:
                        continue
                    out = lm.model(input_ids=input_ids,
                                   attention_mask=enc["attention_mask"][idx])
                    loss = loss_fn(out.logits.view(-1, out.logits.shape[-1]),
                                   labels.view(-1))
                    optimizer.zero_grad()
                    loss.backward()
                    optimizer.step()
                    epoch_loss += float(loss.detach())
                log.info("adapter %s epoch %d/%d loss %.4f", adapter_id, epoch + 1,
                         epochs, epoch_loss)
        finally:
            adapters.detach()
            # serving path re-attaches on demand; clear any cached activation
            lm._active_adapter = None
            if lm._adapter_set is not None:
                lm._adapter_set.detach()
                lm._adapter_set = None
        record = AdapterRecord(
            adapter_id=adapter_id, base_model_tag=lm.base_tag,
            dataset_id=dataset_id, epochs=epochs, learning_rate=learning_rate,
            beta1=beta1, beta2=beta2, created_at=now_iso(),
            extras={"batch_size": BATCH_SIZE, "max_seq_len": MAX_SEQ_LEN,
                    "mask_prob": MASK_PROB, "adapter_dim": adapters.bottleneck,
                    "seed": seed, "checksum": adapters.checksum()})
        lm.store.save(record, adapters)
        return record
