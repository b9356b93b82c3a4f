"""HTTP JSON service.

Endpoints match the gateway wire protocol: POST /fill, POST /embed,
GET /health, plus POST /finetune and GET /adapters for adapter management.
An optional ``adapter_id`` on /fill and /embed selects a stored adapter; the
response model_tag always names exactly what produced it.
"""

import argparse
import dataclasses
import logging
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .modeling import BlankError, MaskedLM, UnknownAdapterError
from .training import (
    DEFAULT_BETA1,
    DEFAULT_BETA2,
    DEFAULT_EPOCHS,
    DEFAULT_LR,
    finetune_adapter,
    load_dataset_sentences,
)

log = logging.getLogger(__name__)

MAX_EMBED_BATCH = 128


class FillRequest(BaseModel):
    text: str
    candidates: list[str] = Field(min_length=1)
    adapter_id: str | None = None


class EmbedRequest(BaseModel):
    texts: list[str] = Field(min_length=1)
    adapter_id: str | None = None


class FinetuneRequest(BaseModel):
    dataset_id: str
    adapter_id: str | None = None
    epochs: int = DEFAULT_EPOCHS
    learning_rate: float = DEFAULT_LR
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    seed: int = 0


def create_app(checkpoint: str | Path, adapters_dir: str | Path,
               data_root: str | Path, model_tag: str | None = None,
               default_adapter: str | None = None) -> FastAPI:
    lm = MaskedLM(checkpoint, model_tag=model_tag, adapters_dir=adapters_dir)
    app = FastAPI(title="mlm-sidecar", version=__version__)
    app.state.lm = lm
    app.state.data_root = Path(data_root)
    app.state.default_adapter = default_adapter

    def _resolve_adapter(requested: str | None) -> str | None:
        return requested if requested is not None else app.state.default_adapter

    @app.get("/health")
    def health():
        return {"status": "ok", "model_tag": lm.base_tag,
                "default_adapter": app.state.default_adapter,
                "version": __version__}

    @app.post("/fill")
    def fill(req: FillRequest):
        adapter_id = _resolve_adapter(req.adapter_id)
        try:
            probs, errors = lm.fill(req.text, req.candidates, adapter_id)
        except BlankError as e:
            raise HTTPException(status_code=400, detail=str(e))
        except UnknownAdapterError as e:
            raise HTTPException(status_code=404, detail=f"unknown adapter_id: {e}")
        body = {"probs": probs, "model_tag": lm.model_tag(adapter_id)}
        if errors:
            body["errors"] = errors
        return body

    @app.post("/embed")
    def embed(req: EmbedRequest):
        if len(req.texts) > MAX_EMBED_BATCH:
            raise HTTPException(
                status_code=413,
                detail=f"batch of {len(req.texts)} exceeds limit {MAX_EMBED_BATCH}")
        adapter_id = _resolve_adapter(req.adapter_id)
        try:
            vectors = lm.embed(req.texts, adapter_id)
        except UnknownAdapterError as e:
            raise HTTPException(status_code=404, detail=f"unknown adapter_id: {e}")
        return {"vectors": vectors, "model_tag": lm.model_tag(adapter_id)}

    @app.post("/finetune")
    def finetune(req: FinetuneRequest):
        adapter_id = req.adapter_id or f"{req.dataset_id}-a{req.seed}"
        try:
            sentences = load_dataset_sentences(app.state.data_root, req.dataset_id)
        except FileNotFoundError as e:
            raise HTTPException(status_code=404, detail=str(e))
        record = finetune_adapter(
            lm, adapter_id, req.dataset_id, sentences, epochs=req.epochs,
            learning_rate=req.learning_rate, beta1=req.beta1, beta2=req.beta2,
            seed=req.seed)
        return dataclasses.asdict(record) | {"model_tag": record.model_tag}

    @app.get("/adapters")
    def adapters():
        if lm.store is None:
            return []
        return [dataclasses.asdict(r) | {"model_tag": r.model_tag}
                for r in lm.store.list_records()]

    return app


def main(argv=None) -> int:
    import uvicorn

    parser = argparse.ArgumentParser(prog="mlm-sidecar")
    parser.add_argument("--checkpoint", required=True,
                        help="pretrained masked-LM checkpoint directory or id")
    parser.add_argument("--adapters-dir", default="adapters")
    parser.add_argument("--data-root", default=".",
                        help="directory containing media-diet dataset folders")
    parser.add_argument("--model-tag", default=None)
    parser.add_argument("--adapter", default=None,
                        help="serve this adapter by default")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8301)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO)
    app = create_app(args.checkpoint, args.adapters_dir, args.data_root,
                     model_tag=args.model_tag, default_adapter=args.adapter)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
