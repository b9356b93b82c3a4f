"""Bottleneck adapters: the only trainable parameters during finetuning.

One adapter block sits after each encoder layer: down-project, ReLU,
up-project, residual add. The up-projection starts at zero, so a freshly
inserted (or zero-epoch) adapter is an exact identity and the adapted model
is behaviorally the base model.
"""

import datetime as dt
import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from torch import nn

ADAPTER_DIM = 16


class AdapterBlock(nn.Module):
    def __init__(self, hidden_size: int, bottleneck: int = ADAPTER_DIM):
        super().__init__()
        self.down = nn.Linear(hidden_size, bottleneck)
        self.up = nn.Linear(bottleneck, hidden_size)
        nn.init.normal_(self.down.weight, std=0.02)
        nn.init.zeros_(self.down.bias)
        # Identity at init: residual branch contributes exactly nothing.
        nn.init.zeros_(self.up.weight)
        nn.init.zeros_(self.up.bias)

    def forward(self, hidden):
        return hidden + self.up(torch.relu(self.down(hidden)))


class AdapterSet(nn.Module):
    """One AdapterBlock per encoder layer, attached via forward hooks."""

    def __init__(self, n_layers: int, hidden_size: int, bottleneck: int = ADAPTER_DIM):
        super().__init__()
        self.blocks = nn.ModuleList(
            AdapterBlock(hidden_size, bottleneck) for _ in range(n_layers))
        self.bottleneck = bottleneck
        self._handles = []

    def attach(self, encoder_layers):
        if self._handles:
            raise RuntimeError("adapter set already attached")
        for layer, block in zip(encoder_layers, self.blocks):
            def hook(module, inputs, output, _block=block):
                if isinstance(output, tuple):
                    return (_block(output[0]),) + tuple(output[1:])
                return _block(output)
            self._handles.append(layer.register_forward_hook(hook))

    def detach(self):
        for h in self._handles:
            h.remove()
        self._handles = []

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name, tensor in sorted(self.state_dict().items()):
            digest.update(name.encode())
            digest.update(tensor.detach().cpu().numpy().tobytes())
        return digest.hexdigest()


@dataclass
class AdapterRecord:
    adapter_id: str
    base_model_tag: str
    dataset_id: str
    epochs: int
    learning_rate: float
    beta1: float
    beta2: float
    created_at: str
    extras: dict = field(default_factory=dict)

    @property
    def model_tag(self) -> str:
        return f"{self.base_model_tag}+{self.adapter_id}"


class AdapterStore:
    """Directory of finetuned adapters: weights.pt + record.json each."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _dir(self, adapter_id: str) -> Path:
        if not re.fullmatch(r"[\w.+-]+", adapter_id):
            raise ValueError(f"bad adapter_id {adapter_id!r}")
        return self.root / adapter_id

    def exists(self, adapter_id: str) -> bool:
        return (self._dir(adapter_id) / "record.json").exists()

    def save(self, record: AdapterRecord, adapters: AdapterSet):
        target = self._dir(record.adapter_id)
        target.mkdir(parents=True, exist_ok=True)
        torch.save(adapters.state_dict(), target / "weights.pt")
        with open(target / "record.json", "w", encoding="utf-8") as f:
            json.dump(asdict(record), f, indent=2, sort_keys=True)
            f.write("\n")

    def load_record(self, adapter_id: str) -> AdapterRecord:
        with open(self._dir(adapter_id) / "record.json", encoding="utf-8") as f:
            return AdapterRecord(**json.load(f))

    def load_weights(self, adapter_id: str, adapters: AdapterSet):
        state = torch.load(self._dir(adapter_id) / "weights.pt",
                           map_location="cpu", weights_only=True)
        adapters.load_state_dict(state)

    def list_records(self) -> list[AdapterRecord]:
        records = []
        for record_file in sorted(self.root.glob("*/record.json")):
            with open(record_file, encoding="utf-8") as f:
                records.append(AdapterRecord(**json.load(f)))
        return records


def now_iso() -> str:
    return dt.datetime.now(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
