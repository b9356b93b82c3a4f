"""Uniform interface over masked-LM scorers and sentence embedders.

Three backend kinds share one request surface:

- ``ngram``: a local Kneser-Ney model file (cloze window products serve as the
  fill "probability"), or a background-unigram ``.tsv`` (context-free lookup,
  the base model of the n-gram lane).
- ``neural_remote``: HTTP JSON sidecar (``POST /fill``, ``POST /embed``,
  ``POST /translate``), with 3 retries and exponential backoff on transport
  errors and 5xx.
- ``replay``: a recorded request/response cache; deterministic, no network.

Every response carries the producing model_tag. Blank marker is the literal
``[BLANK]``; a backend returning an exact zero probability is floored at
PROB_FLOOR so downstream ratios stay finite. The synchronous client issues
one request at a time, so the in-flight cap is 1; backends themselves are
stateless per request and safe to share.
"""

import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Callable, Sequence

import httpx

from .errors import (
    BackendProtocolError,
    BackendUnavailableError,
    MediaDietError,
    MultiTokenCandidateError,
)
from .ngram import BackgroundUnigrams, NGramModel, candidate_token, cloze_window_product
from .replay import ReplayCache, ReplayRecorder

if TYPE_CHECKING:  # pragma: no cover
    from .probe import PromptSpec

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12
BACKEND_KINDS = ("ngram", "neural_remote", "replay")

RETRIES = 3
BACKOFF_BASE_S = 0.1


@dataclass(frozen=True)
class BackendRef:
    """Pointer to a scorer: kind, endpoint or file path, pinned model tag."""

    kind: str
    endpoint_or_path: str
    model_tag: str

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise MediaDietError(f"backend kind must be one of {BACKEND_KINDS}, "
                                 f"got {self.kind!r}")


@dataclass
class FillResponse:
    """Per-candidate probabilities plus provenance.

    Candidates the backend could not score appear in ``errors`` instead of
    ``probs``; together the two maps cover every requested candidate.
    """

    prompt_id: str
    probs: dict[str, float]
    model_tag: str
    errors: dict[str, str] = field(default_factory=dict)


@dataclass
class EmbedResponse:
    vectors: list[list[float]]
    model_tag: str


# -- backend implementations --------------------------------------------------


class _Backend:
    model_tag: str = ""

    def fill(self, text: str, candidates: Sequence[str]) -> tuple[dict[str, float], dict[str, str], str]:
        raise BackendProtocolError(f"{type(self).__name__} does not support fill")

    def embed(self, texts: Sequence[str]) -> tuple[list[list[float]], str]:
        raise BackendProtocolError(f"{type(self).__name__} does not support embeddings")

    def translate(self, text: str, direction: str, sampling, n: int) -> list[str]:
        raise BackendProtocolError(f"{type(self).__name__} does not support translation")


class NgramBackend(_Backend):
    def __init__(self, model: NGramModel, model_tag: str):
        self.model = model
        self.model_tag = model_tag

    def fill(self, text, candidates):
        probs, errors = {}, {}
        for cand in candidates:
            try:
                probs[cand] = cloze_window_product(self.model, text, cand)
            except MultiTokenCandidateError as e:
                errors[cand] = str(e)
        return probs, errors, self.model_tag


class UnigramBackend(_Backend):
    """Context-free background table; the non-adapted reference of the n-gram lane."""

    def __init__(self, table: BackgroundUnigrams, model_tag: str):
        self.table = table
        self.model_tag = model_tag

    def fill(self, text, candidates):
        probs, errors = {}, {}
        for cand in candidates:
            try:
                probs[cand] = self.table.prob(candidate_token(cand))
            except MultiTokenCandidateError as e:
                errors[cand] = str(e)
        return probs, errors, self.model_tag


class RemoteBackend(_Backend):
    def __init__(self, endpoint: str, model_tag: str, client: httpx.Client | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.model_tag = model_tag
        self._client = client

    def _post(self, path: str, payload: dict) -> dict:
        client = self._client or _default_client()
        last_exc: Exception | None = None
        for attempt in range(RETRIES + 1):
            if attempt:
                time.sleep(BACKOFF_BASE_S * 2 ** (attempt - 1))
            try:
                resp = client.post(self.endpoint + path, json=payload)
            except httpx.TransportError as e:
                last_exc = e
                continue
            if resp.status_code >= 500:
                last_exc = BackendUnavailableError(
                    f"{path}: server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendProtocolError(f"{path}: HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as e:
                raise BackendProtocolError(f"{path}: response is not JSON: {e}")
        raise BackendUnavailableError(
            f"{self.endpoint}{path} unreachable after {RETRIES} retries: {last_exc}")

    def fill(self, text, candidates):
        body = self._post("/fill", {"text": text, "candidates": list(candidates)})
        try:
            probs = {str(k): float(v) for k, v in body["probs"].items()}
            tag = str(body["model_tag"])
        except (KeyError, TypeError, ValueError) as e:
            raise BackendProtocolError(f"/fill: malformed response: {e}")
        errors = {str(k): str(v) for k, v in body.get("errors", {}).items()}
        return probs, errors, tag

    def embed(self, texts):
        body = self._post("/embed", {"texts": list(texts)})
        try:
            vectors = [[float(x) for x in v] for v in body["vectors"]]
            tag = str(body["model_tag"])
        except (KeyError, TypeError, ValueError) as e:
            raise BackendProtocolError(f"/embed: malformed response: {e}")
        return vectors, tag

    def translate(self, text, direction, sampling, n):
        body = self._post("/translate", {"text": text, "direction": direction,
                                         "sampling": sampling, "n": n})
        try:
            return [str(s) for s in body["outputs"]]
        except (KeyError, TypeError) as e:
            raise BackendProtocolError(f"/translate: malformed response: {e}")


class ReplayBackend(_Backend):
    def __init__(self, cache: ReplayCache, expected_tag: str = ""):
        self.cache = cache
        self.model_tag = expected_tag

    def _check_tag(self, tag: str):
        if self.model_tag and tag != self.model_tag:
            raise BackendProtocolError(
                f"replay cache recorded model_tag {tag!r}, expected {self.model_tag!r}")

    def fill(self, text, candidates):
        body = self.cache.lookup(_fill_request(text, candidates))
        tag = str(body["model_tag"])
        self._check_tag(tag)
        return ({str(k): float(v) for k, v in body["probs"].items()},
                {str(k): str(v) for k, v in body.get("errors", {}).items()}, tag)

    def embed(self, texts):
        body = self.cache.lookup(_embed_request(texts))
        tag = str(body["model_tag"])
        self._check_tag(tag)
        return [list(map(float, v)) for v in body["vectors"]], tag

    def translate(self, text, direction, sampling, n):
        body = self.cache.lookup(_translate_request(text, direction, sampling, n))
        return [str(s) for s in body["outputs"]]


class RecordingBackend(_Backend):
    """Delegates to an inner backend and appends each exchange to a cache file."""

    def __init__(self, inner: _Backend, recorder: ReplayRecorder):
        self.inner = inner
        self.recorder = recorder

    @property
    def model_tag(self):
        return self.inner.model_tag

    def fill(self, text, candidates):
        probs, errors, tag = self.inner.fill(text, candidates)
        response = {"probs": probs, "model_tag": tag}
        if errors:
            response["errors"] = errors
        self.recorder.record(_fill_request(text, candidates), response)
        return probs, errors, tag

    def embed(self, texts):
        vectors, tag = self.inner.embed(texts)
        self.recorder.record(_embed_request(texts), {"vectors": vectors, "model_tag": tag})
        return vectors, tag

    def translate(self, text, direction, sampling, n):
        outputs = self.inner.translate(text, direction, sampling, n)
        self.recorder.record(_translate_request(text, direction, sampling, n),
                             {"outputs": outputs, "model_tag": self.inner.model_tag})
        return outputs


class FunctionBackend(_Backend):
    """Programmatic backend built from plain callables (tests, recording stubs)."""

    def __init__(self, model_tag: str,
                 fill_fn: Callable[[str, Sequence[str]], dict[str, float]] | None = None,
                 embed_fn: Callable[[Sequence[str]], list[list[float]]] | None = None,
                 translate_fn: Callable[[str, str, object, int], list[str]] | None = None):
        self.model_tag = model_tag
        self._fill = fill_fn
        self._embed = embed_fn
        self._translate = translate_fn

    def fill(self, text, candidates):
        if self._fill is None:
            return super().fill(text, candidates)
        return dict(self._fill(text, candidates)), {}, self.model_tag

    def embed(self, texts):
        if self._embed is None:
            return super().embed(texts)
        return self._embed(texts), self.model_tag

    def translate(self, text, direction, sampling, n):
        if self._translate is None:
            return super().translate(text, direction, sampling, n)
        return self._translate(text, direction, sampling, n)


# -- canonical requests (shared by remote, replay, and recording) -------------


def _fill_request(text: str, candidates: Sequence[str]) -> dict:
    return {"op": "fill", "text": text, "candidates": sorted(candidates)}


def _embed_request(texts: Sequence[str]) -> dict:
    return {"op": "embed", "texts": list(texts)}


def _translate_request(text: str, direction: str, sampling, n: int) -> dict:
    return {"op": "translate", "text": text, "direction": direction,
            "sampling": sampling, "n": n}


# -- resolution and public operations -----------------------------------------


@lru_cache(maxsize=None)
def _default_client() -> httpx.Client:
    return httpx.Client(timeout=30.0)


@lru_cache(maxsize=32)
def _load_ngram_file(path: str) -> NGramModel:
    return NGramModel.load(path)


@lru_cache(maxsize=32)
def _load_unigram_file(path: str) -> BackgroundUnigrams:
    return BackgroundUnigrams.load_tsv(path)


def resolve_backend(ref: BackendRef, client: httpx.Client | None = None) -> _Backend:
    if ref.kind == "ngram":
        if ref.endpoint_or_path.endswith(".tsv"):
            return UnigramBackend(_load_unigram_file(ref.endpoint_or_path), ref.model_tag)
        return NgramBackend(_load_ngram_file(ref.endpoint_or_path), ref.model_tag)
    if ref.kind == "neural_remote":
        return RemoteBackend(ref.endpoint_or_path, ref.model_tag, client=client)
    if ref.kind == "replay":
        return ReplayBackend(ReplayCache(ref.endpoint_or_path), expected_tag=ref.model_tag)
    raise MediaDietError(f"unknown backend kind {ref.kind!r}")


def _as_backend(backend, client=None) -> _Backend:
    if isinstance(backend, _Backend):
        return backend
    return resolve_backend(backend, client=client)


def fill_probabilities(backend, prompt: "PromptSpec", candidates: Sequence[str],
                       client: httpx.Client | None = None) -> FillResponse:
    """Probabilities for every candidate in the prompt's blank position.

    ``backend`` is a BackendRef or an already-resolved backend object. Exact
    zeros are floored at PROB_FLOOR; candidates the backend cannot score come
    back in ``errors``.
    """
    if not candidates:
        raise MediaDietError("candidates must be non-empty")
    impl = _as_backend(backend, client)
    probs, errors, tag = impl.fill(prompt.template, candidates)
    missing = [c for c in candidates if c not in probs and c not in errors]
    if missing:
        raise BackendProtocolError(f"backend response missing candidates: {missing}")
    out = {}
    for cand, p in probs.items():
        if not (0.0 <= p <= 1.0):
            raise BackendProtocolError(f"probability for {cand!r} out of [0,1]: {p}")
        out[cand] = max(p, PROB_FLOOR)
    return FillResponse(prompt_id=prompt.prompt_id, probs=out, model_tag=tag,
                        errors=dict(errors))


def embed_sentences(backend, texts: Sequence[str],
                    client: httpx.Client | None = None) -> EmbedResponse:
    """One fixed-dimension vector per input text (neural_remote or replay only)."""
    if not texts:
        return EmbedResponse(vectors=[], model_tag=_as_backend(backend, client).model_tag)
    impl = _as_backend(backend, client)
    vectors, tag = impl.embed(texts)
    if len(vectors) != len(texts):
        raise BackendProtocolError(
            f"backend returned {len(vectors)} vectors for {len(texts)} texts")
    dims = {len(v) for v in vectors}
    if len(dims) > 1:
        raise BackendProtocolError(f"inconsistent embedding dimensions: {sorted(dims)}")
    return EmbedResponse(vectors=vectors, model_tag=tag)


def translate(backend, text: str, direction: str, sampling, n: int,
              client: httpx.Client | None = None) -> list[str]:
    """MT endpoint call; ``sampling`` is ``{"topk": int}`` or ``"greedy"``."""
    return _as_backend(backend, client).translate(text, direction, sampling, n)


def recording(inner: _Backend, cache_path) -> RecordingBackend:
    """Wrap a backend so every exchange is appended to ``cache_path``."""
    return RecordingBackend(inner, ReplayRecorder(cache_path))


def clear_backend_caches():
    """Drop memoized model/table loads (tests that rewrite files need this)."""
    _load_ngram_file.cache_clear()
    _load_unigram_file.cache_clear()
