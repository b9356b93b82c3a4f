"""Masked-LM sidecar: fill-mask probabilities, sentence embeddings, and
adapter finetuning behind a small HTTP JSON API."""

__version__ = "0.1.0"
