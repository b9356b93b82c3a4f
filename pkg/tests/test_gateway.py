import hashlib
import json

import httpx
import numpy as np
import pytest

from conftest import dataset_from_sentences
from mediadiet import gateway
from mediadiet.errors import (
    BackendProtocolError,
    BackendUnavailableError,
    MediaDietError,
    ReplayMissError,
)
from mediadiet.gateway import (
    PROB_FLOOR,
    BackendRef,
    FunctionBackend,
    embed_sentences,
    fill_probabilities,
    recording,
    resolve_backend,
    translate,
)
from mediadiet.ngram import BackgroundUnigrams, cloze_window_product, train_ngram
from mediadiet.probe import PromptSpec, TargetSpec
from mediadiet.replay import ReplayRecorder, request_key


def prompt(template="a [BLANK] c", pid="p1"):
    return PromptSpec(prompt_id=pid, template=template,
                      targets=(TargetSpec(word="b"),))


def hash_embed(texts, dim=8):
    """Deterministic pseudo-embedding: seeded by the text's own hash."""
    out = []
    for t in texts:
        seed = int.from_bytes(hashlib.sha256(t.encode()).digest()[:4], "big")
        rng = np.random.default_rng(seed)
        out.append([float(x) for x in rng.normal(size=dim)])
    return out


class TestBackendRef:
    def test_kind_enum_enforced(self):
        with pytest.raises(MediaDietError, match="kind"):
            BackendRef(kind="carrier_pigeon", endpoint_or_path="x", model_tag="t")


class TestNgramBackend:
    @pytest.fixture()
    def model_path(self, tmp_path):
        ds = dataset_from_sentences(["a b c.", "a b c.", "a d c.", "a d c."])
        model = train_ngram(ds)
        path = tmp_path / "m.kn"
        model.save(path)
        gateway.clear_backend_caches()
        return path

    def test_fill_equals_window_product(self, model_path):
        ref = BackendRef("ngram", str(model_path), "kn:test")
        resp = fill_probabilities(ref, prompt(), ["b", "d", "zzz"])
        from mediadiet.ngram import NGramModel
        model = NGramModel.load(model_path)
        for cand in ["b", "d", "zzz"]:
            assert resp.probs[cand] == pytest.approx(
                cloze_window_product(model, "a [BLANK] c", cand), abs=1e-15)
        assert resp.model_tag == "kn:test"

    def test_multi_token_candidate_reported_per_candidate(self, model_path):
        ref = BackendRef("ngram", str(model_path), "kn:test")
        resp = fill_probabilities(ref, prompt(), ["b", "two words"])
        assert "b" in resp.probs
        assert "two words" in resp.errors
        assert "two words" not in resp.probs

    def test_embed_unsupported(self, model_path):
        ref = BackendRef("ngram", str(model_path), "kn:test")
        with pytest.raises(BackendProtocolError, match="embed"):
            embed_sentences(ref, ["hello"])


class TestUnigramBackend:
    def test_tsv_lookup(self, tmp_path):
        bg = BackgroundUnigrams(freq={"b": 0.25, "d": 0.1})
        path = tmp_path / "bg.tsv"
        bg.save_tsv(path)
        gateway.clear_backend_caches()
        ref = BackendRef("ngram", str(path), "bg:v1")
        resp = fill_probabilities(ref, prompt(), ["b", "d", "nope"])
        assert resp.probs["b"] == 0.25
        assert resp.probs["d"] == 0.1
        assert resp.probs["nope"] == 1e-9  # table floor for absent tokens


class TestReplay:
    def test_primed_cache_returns_exact_value(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        rec = ReplayRecorder(path)
        request = {"op": "fill", "text": "a [BLANK] c", "candidates": ["x"]}
        rec.record(request, {"probs": {"x": 0.3}, "model_tag": "pinned"})
        ref = BackendRef("replay", str(path), "")
        resp = fill_probabilities(ref, prompt(), ["x"])
        assert resp.probs["x"] == 0.3
        assert resp.model_tag == "pinned"

    def test_miss_raises(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        ReplayRecorder(path).record({"op": "fill", "text": "t", "candidates": ["x"]},
                                    {"probs": {"x": 0.5}, "model_tag": "m"})
        ref = BackendRef("replay", str(path), "")
        with pytest.raises(ReplayMissError):
            fill_probabilities(ref, prompt("other [BLANK]"), ["x"])

    def test_tag_mismatch_detected(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        ReplayRecorder(path).record(
            {"op": "fill", "text": "a [BLANK] c", "candidates": ["x"]},
            {"probs": {"x": 0.5}, "model_tag": "actual"})
        ref = BackendRef("replay", str(path), "expected")
        with pytest.raises(BackendProtocolError, match="model_tag"):
            fill_probabilities(ref, prompt(), ["x"])

    def test_record_then_replay_indistinguishable(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        inner = FunctionBackend(
            "stub:v1",
            fill_fn=lambda text, cands: {c: 1.0 / (2 + len(c)) for c in cands},
            embed_fn=hash_embed,
            translate_fn=lambda text, d, s, n: [text.upper()] * min(n, 2),
        )
        rec = recording(inner, path)
        live = []
        live.append(fill_probabilities(rec, prompt("x [BLANK] y"), ["aa", "b"]))
        live.append(fill_probabilities(rec, prompt("[BLANK] z"), ["ccc"]))
        live_embed = embed_sentences(rec, ["one", "two", "one"])
        live_tr = translate(rec, "hello", "en-nl", {"topk": 20}, 25)

        ref = BackendRef("replay", str(path), "stub:v1")
        replayed = [
            fill_probabilities(ref, prompt("x [BLANK] y"), ["aa", "b"]),
            fill_probabilities(ref, prompt("[BLANK] z"), ["ccc"]),
        ]
        for a, b in zip(live, replayed):
            assert a.probs == b.probs
            assert a.model_tag == b.model_tag
        rep_embed = embed_sentences(ref, ["one", "two", "one"])
        assert rep_embed.vectors == live_embed.vectors
        assert rep_embed.model_tag == live_embed.model_tag
        assert translate(ref, "hello", "en-nl", {"topk": 20}, 25) == live_tr

    def test_candidate_order_does_not_change_key(self):
        a = request_key({"op": "fill", "text": "t", "candidates": sorted(["b", "a"])})
        b = request_key({"op": "fill", "text": "t", "candidates": sorted(["a", "b"])})
        assert a == b


class TestRemoteBackend:
    def make_client(self, handler):
        return httpx.Client(transport=httpx.MockTransport(handler))

    def test_fill_round_trip(self):
        def handler(request):
            assert request.url.path == "/fill"
            payload = json.loads(request.content)
            return httpx.Response(200, json={
                "probs": {c: 0.25 for c in payload["candidates"]},
                "model_tag": "sidecar:v1"})

        ref = BackendRef("neural_remote", "http://sidecar", "sidecar:v1")
        resp = fill_probabilities(ref, prompt(), ["b"], client=self.make_client(handler))
        assert resp.probs == {"b": 0.25}
        assert resp.model_tag == "sidecar:v1"

    def test_retry_then_success(self, monkeypatch):
        monkeypatch.setattr(gateway, "BACKOFF_BASE_S", 0.0)
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] < 3:
                return httpx.Response(503, text="busy")
            return httpx.Response(200, json={"probs": {"b": 0.5}, "model_tag": "m"})

        ref = BackendRef("neural_remote", "http://sidecar", "m")
        resp = fill_probabilities(ref, prompt(), ["b"], client=self.make_client(handler))
        assert resp.probs["b"] == 0.5
        assert calls["n"] == 3

    def test_unreachable_after_retries(self, monkeypatch):
        monkeypatch.setattr(gateway, "BACKOFF_BASE_S", 0.0)

        def handler(request):
            raise httpx.ConnectError("refused")

        ref = BackendRef("neural_remote", "http://sidecar", "m")
        with pytest.raises(BackendUnavailableError, match="retries"):
            fill_probabilities(ref, prompt(), ["b"], client=self.make_client(handler))

    def test_protocol_error_not_retried(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(400, text="bad request")

        ref = BackendRef("neural_remote", "http://sidecar", "m")
        with pytest.raises(BackendProtocolError):
            fill_probabilities(ref, prompt(), ["b"], client=self.make_client(handler))
        assert calls["n"] == 1

    def test_embed(self):
        def handler(request):
            payload = json.loads(request.content)
            return httpx.Response(200, json={
                "vectors": [[1.0, 2.0]] * len(payload["texts"]),
                "model_tag": "sidecar:v1"})

        ref = BackendRef("neural_remote", "http://sidecar", "sidecar:v1")
        resp = embed_sentences(ref, ["x", "y"], client=self.make_client(handler))
        assert resp.vectors == [[1.0, 2.0], [1.0, 2.0]]


class TestFillContract:
    def test_zero_probability_floored(self):
        backend = FunctionBackend("z", fill_fn=lambda t, c: {x: 0.0 for x in c})
        resp = fill_probabilities(backend, prompt(), ["b"])
        assert resp.probs["b"] == PROB_FLOOR

    def test_out_of_range_probability_rejected(self):
        backend = FunctionBackend("z", fill_fn=lambda t, c: {x: 1.5 for x in c})
        with pytest.raises(BackendProtocolError, match="out of"):
            fill_probabilities(backend, prompt(), ["b"])

    def test_missing_candidate_rejected(self):
        backend = FunctionBackend("z", fill_fn=lambda t, c: {})
        with pytest.raises(BackendProtocolError, match="missing"):
            fill_probabilities(backend, prompt(), ["b"])

    def test_empty_candidates_rejected(self):
        backend = FunctionBackend("z", fill_fn=lambda t, c: {})
        with pytest.raises(MediaDietError, match="non-empty"):
            fill_probabilities(backend, prompt(), [])


class TestEmbedContract:
    def test_duplicates_identical(self):
        backend = FunctionBackend("e", embed_fn=hash_embed)
        resp = embed_sentences(backend, ["same", "same", "other"])
        assert resp.vectors[0] == resp.vectors[1]
        assert resp.vectors[0] != resp.vectors[2]

    def test_empty_list(self):
        backend = FunctionBackend("e", embed_fn=hash_embed)
        assert embed_sentences(backend, []).vectors == []

    def test_inconsistent_dims_rejected(self):
        backend = FunctionBackend("e", embed_fn=lambda ts: [[1.0], [1.0, 2.0]])
        with pytest.raises(BackendProtocolError, match="dimensions"):
            embed_sentences(backend, ["a", "b"])

    def test_count_mismatch_rejected(self):
        backend = FunctionBackend("e", embed_fn=lambda ts: [[1.0]])
        with pytest.raises(BackendProtocolError, match="vectors"):
            embed_sentences(backend, ["a", "b"])


class TestResolve:
    def test_all_kinds_resolve(self, tmp_path):
        ds = dataset_from_sentences(["a b.", "a b."])
        path = tmp_path / "m.kn"
        train_ngram(ds).save(path)
        gateway.clear_backend_caches()
        assert resolve_backend(BackendRef("ngram", str(path), "t"))
        assert resolve_backend(BackendRef("neural_remote", "http://x", "t"))
        (tmp_path / "c.jsonl").write_text("")
        assert resolve_backend(BackendRef("replay", str(tmp_path / "c.jsonl"), ""))
