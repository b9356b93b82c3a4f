"""Prompt paraphrasing and robustness evaluation.

Two generators: embedding-space synonym substitution (pure function of the
prompt, the table, and the thresholds) and backtranslation through an
external MT endpoint (deterministic under a replay cache). Both preserve the
blank and the target set exactly; anything that loses the blank is discarded
and counted.
"""

import dataclasses
import logging
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from . import gateway
from .errors import CoverageMismatchError, MediaDietError
from .probe import BLANK, PromptSpec

log = logging.getLogger(__name__)

DEFAULT_MAX_SUBS = 2
DEFAULT_MIN_COS = 0.6
BLANK_PLACEHOLDER = "XBLANKX"  # survives tokenization; restored after the round trip

_WORD_RE = re.compile(r"\w+", re.UNICODE)


def load_stopwords() -> frozenset[str]:
    text = resources.files("mediadiet").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines()
                     if w.strip() and not w.startswith("#"))


STOPWORDS = load_stopwords()


class EmbeddingTable:
    """Word vectors loaded from 'token v1 v2 … vd' lines; lookups deterministic."""

    def __init__(self, vectors: dict[str, list[float]]):
        if not vectors:
            raise MediaDietError("embedding table is empty")
        dims = {len(v) for v in vectors.values()}
        if len(dims) != 1:
            raise MediaDietError(f"inconsistent embedding dimensions: {sorted(dims)}")
        self.dim = dims.pop()
        self.tokens = sorted(vectors)
        self._index = {t: i for i, t in enumerate(self.tokens)}
        mat = np.array([vectors[t] for t in self.tokens], dtype=float)
        norms = np.linalg.norm(mat, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        self._unit = mat / norms

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        vectors = {}
        with open(path, encoding="utf-8") as f:
            for i, line in enumerate(f, start=1):
                parts = line.split()
                if not parts:
                    continue
                try:
                    vectors[parts[0]] = [float(x) for x in parts[1:]]
                except ValueError:
                    raise MediaDietError(f"{path}: line {i}: non-numeric vector entry")
        return cls(vectors)

    def nearest_neighbor(self, token: str) -> tuple[str, float] | None:
        """Closest other token by cosine; ties broken lexicographically."""
        if token not in self._index:
            return None
        i = self._index[token]
        sims = self._unit @ self._unit[i]
        sims[i] = -np.inf
        best = np.max(sims)
        if not np.isfinite(best):
            return None
        candidates = [self.tokens[j] for j in np.nonzero(sims == best)[0]]
        return min(candidates), float(best)


@dataclass
class ParaphraseSet:
    source_prompt_id: str
    method: str  # synsub | backtranslation
    variants: list[PromptSpec]
    discarded: int = 0

    def __post_init__(self):
        for v in self.variants:
            if v.template.count(BLANK) != 1:
                raise MediaDietError(f"variant {v.prompt_id!r} lost the blank")


def _match_case(replacement: str, original: str) -> str:
    if original[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def synonym_substitute(prompt: PromptSpec, table: EmbeddingTable,
                       max_subs: int = DEFAULT_MAX_SUBS,
                       min_cos: float = DEFAULT_MIN_COS) -> ParaphraseSet:
    """Replace up to ``max_subs`` eligible words with their nearest neighbor.

    Eligible: in the table, not a stopword, not the blank, not any target
    word or synonym. Words are scanned left to right, so the output is a pure
    function of the inputs. With nothing to replace, the single variant is
    the source prompt itself.
    """
    if not (0.0 < min_cos < 1.0):
        raise MediaDietError("min_cos must be in (0, 1)")
    protected = {t.word for t in prompt.targets}
    for t in prompt.targets:
        protected.update(t.synonyms)

    subs = 0
    out = []
    # Only [BLANK] contains brackets, so splitting on whitespace keeps it whole.
    for piece in prompt.template.split(" "):
        if subs >= max_subs or piece == BLANK:
            out.append(piece)
            continue
        m = _WORD_RE.search(piece)
        if m is None:
            out.append(piece)
            continue
        word = m.group(0)
        lower = word.lower()
        if lower in STOPWORDS or lower in protected or lower not in table:
            out.append(piece)
            continue
        found = table.nearest_neighbor(lower)
        if found is None or found[1] < min_cos:
            out.append(piece)
            continue
        out.append(piece[:m.start()] + _match_case(found[0], word) + piece[m.end():])
        subs += 1
    template = " ".join(out)
    if subs == 0:
        return ParaphraseSet(prompt.prompt_id, "synsub", [prompt])
    variant = dataclasses.replace(prompt, prompt_id=f"{prompt.prompt_id}-synsub",
                                  template=template, variant="synsub")
    return ParaphraseSet(prompt.prompt_id, "synsub", [variant])


def backtranslate(prompt: PromptSpec, mt_backend, n_samples: int = 25,
                  topk: int = 20, pivot: str = "nl", client=None) -> ParaphraseSet:
    """Round-trip the prompt through a pivot language.

    Forward pass samples ``n_samples`` translations with top-k sampling;
    each comes back via greedy decoding. The blank is protected by a
    placeholder; round trips that lose it are discarded and counted.
    Variants are deduplicated in first-seen order.
    """
    protected = prompt.template.replace(BLANK, BLANK_PLACEHOLDER)
    forward = gateway.translate(mt_backend, protected, f"en-{pivot}",
                                {"topk": topk}, n_samples, client=client)
    seen = set()
    variants = []
    discarded = 0
    for i, sample in enumerate(forward[:n_samples]):
        back = gateway.translate(mt_backend, sample, f"{pivot}-en", "greedy", 1,
                                 client=client)
        if not back:
            discarded += 1
            continue
        text = back[0]
        if text.count(BLANK_PLACEHOLDER) != 1:
            discarded += 1
            continue
        template = text.replace(BLANK_PLACEHOLDER, BLANK)
        if template in seen:
            continue
        seen.add(template)
        if template == prompt.template:
            variants.append(prompt)
            continue
        variants.append(dataclasses.replace(
            prompt, prompt_id=f"{prompt.prompt_id}-bt{len(variants):02d}",
            template=template, variant="backtranslation"))
    if discarded:
        log.warning("prompt %s: discarded %d/%d backtranslation samples",
                    prompt.prompt_id, discarded, len(forward))
    if not variants:
        log.warning("prompt %s: backtranslation produced no usable variants",
                    prompt.prompt_id)
    return ParaphraseSet(prompt.prompt_id, "backtranslation", variants,
                         discarded=discarded)


def robustness_eval(orig_scores: pd.DataFrame, variant_scores: pd.DataFrame,
                    joined: pd.DataFrame, B: int = 2000, seed: int = 0) -> pd.DataFrame:
    """Correlation with survey proportions, original prompts vs variants.

    Variant scores are averaged per (diet, question, target) across variants
    before correlating, so each question keeps equal weight. Requires the
    variants to cover exactly the original (diet, question) pairs.
    """
    from .analysis import pearson_bootstrap
    from .analysis.seeds import derive_seed

    key = ["diet_id", "question_id", "target_word"]
    orig = orig_scores[orig_scores["error"] == ""][key + ["score"]]
    var = variant_scores[variant_scores["error"] == ""]
    cover_o = set(map(tuple, orig[["diet_id", "question_id"]].drop_duplicates().values))
    cover_v = set(map(tuple, var[["diet_id", "question_id"]].drop_duplicates().values))
    if cover_o != cover_v:
        missing = cover_o ^ cover_v
        raise CoverageMismatchError(
            f"original and variant scores cover different (diet, question) pairs; "
            f"symmetric difference: {sorted(missing)[:10]}")
    props = joined[key + ["proportion"]]
    rows = []
    for label, table in [("orig", orig),
                         (str(var["variant"].iloc[0]) if len(var) else "variant",
                          var.groupby(key, as_index=False)["score"].mean())]:
        merged = table.merge(props, on=key, how="inner")
        if len(merged) < len(props):
            raise CoverageMismatchError(
                f"{label}: only {len(merged)} of {len(props)} joined rows matched")
        res = pearson_bootstrap(merged["score"].to_numpy(),
                                merged["proportion"].to_numpy(),
                                B=B, seed=derive_seed(seed, "robustness", label))
        rows.append({"setting": label, "r": res.r, "ci_low": res.ci_low,
                     "ci_high": res.ci_high, "n": res.n})
    return pd.DataFrame(rows)
