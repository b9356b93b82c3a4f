"""Model wrapper: fill-mask distributions, mean-pooled embeddings, adapters.

The blank marker in request text is the literal ``[BLANK]``; it maps to the
tokenizer's mask token. Candidates must be single vocabulary tokens; anything
else is reported per candidate, never silently renormalized. All computation
runs in eval mode on CPU float32, so outputs are deterministic for a pinned
checkpoint.
"""

import threading
from pathlib import Path

import torch
from transformers import AutoModelForMaskedLM, AutoTokenizer

from .adapters import AdapterSet, AdapterStore

BLANK = "[BLANK]"
MAX_SEQ_LEN = 128


class BlankError(ValueError):
    """Request text does not contain exactly one blank."""


class UnknownAdapterError(KeyError):
    pass


def _encoder_layers(model):
    return model.base_model.encoder.layer


class MaskedLM:
    """A pinned base checkpoint plus any number of stored adapters.

    Serving is read-only over the loaded weights; adapter swaps are guarded
    by a lock so concurrent requests see a consistent model.
    """

    def __init__(self, checkpoint: str | Path, model_tag: str | None = None,
                 adapters_dir: str | Path | None = None):
        self.tokenizer = AutoTokenizer.from_pretrained(str(checkpoint))
        self.model = AutoModelForMaskedLM.from_pretrained(str(checkpoint))
        self.model.eval()
        for p in self.model.parameters():
            p.requires_grad_(False)
        self.base_tag = model_tag or Path(str(checkpoint)).name
        self.store = AdapterStore(adapters_dir) if adapters_dir else None
        self.hidden_size = self.model.config.hidden_size
        self.n_layers = self.model.config.num_hidden_layers
        self._active_adapter: str | None = None
        self._adapter_set: AdapterSet | None = None
        self._lock = threading.Lock()

    # -- adapter management ----------------------------------------------------

    def model_tag(self, adapter_id: str | None) -> str:
        return f"{self.base_tag}+{adapter_id}" if adapter_id else self.base_tag

    def _activate(self, adapter_id: str | None):
        if adapter_id == self._active_adapter:
            return
        if self._adapter_set is not None:
            self._adapter_set.detach()
            self._adapter_set = None
        if adapter_id is not None:
            if self.store is None or not self.store.exists(adapter_id):
                raise UnknownAdapterError(adapter_id)
            adapter_set = AdapterSet(self.n_layers, self.hidden_size)
            self.store.load_weights(adapter_id, adapter_set)
            adapter_set.eval()
            adapter_set.attach(_encoder_layers(self.model))
            self._adapter_set = adapter_set
        self._active_adapter = adapter_id

    # -- inference ---------------------------------------------------------------

    def _encode_with_mask(self, text: str):
        if text.count(BLANK) != 1:
            raise BlankError(f"text must contain exactly one {BLANK}, "
                             f"found {text.count(BLANK)}")
        replaced = text.replace(BLANK, self.tokenizer.mask_token)
        enc = self.tokenizer(replaced, return_tensors="pt", truncation=True,
                             max_length=MAX_SEQ_LEN)
        mask_positions = (enc["input_ids"][0] == self.tokenizer.mask_token_id)
        if int(mask_positions.sum()) != 1:
            raise BlankError("blank was lost in tokenization (truncated?)")
        return enc, int(mask_positions.nonzero()[0, 0])

    def fill_distribution(self, text: str, adapter_id: str | None = None) -> torch.Tensor:
        """Full-vocabulary softmax at the blank position."""
        with self._lock:
            self._activate(adapter_id)
            enc, pos = self._encode_with_mask(text)
            with torch.no_grad():
                logits = self.model(**enc).logits[0, pos]
            return torch.softmax(logits.float(), dim=-1)

    def candidate_id(self, candidate: str) -> int | None:
        """Vocabulary id if the candidate is a single token, else None."""
        ids = self.tokenizer(candidate, add_special_tokens=False)["input_ids"]
        if len(ids) != 1 or ids[0] == self.tokenizer.unk_token_id:
            return None
        return ids[0]

    def fill(self, text: str, candidates: list[str],
             adapter_id: str | None = None) -> tuple[dict, dict]:
        dist = self.fill_distribution(text, adapter_id)
        probs, errors = {}, {}
        for cand in candidates:
            token_id = self.candidate_id(cand)
            if token_id is None:
                errors[cand] = "not a single vocabulary token"
            else:
                probs[cand] = float(dist[token_id])
        return probs, errors

    def embed(self, texts: list[str], adapter_id: str | None = None) -> list[list[float]]:
        """Mean-pooled final-layer vectors, one per text."""
        with self._lock:
            self._activate(adapter_id)
            enc = self.tokenizer(list(texts), return_tensors="pt", padding=True,
                                 truncation=True, max_length=MAX_SEQ_LEN)
            with torch.no_grad():
                hidden = self.model.base_model(**enc).last_hidden_state
            mask = enc["attention_mask"].unsqueeze(-1).float()
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1.0)
            return [[float(x) for x in row] for row in pooled]
