"""Interpolated Kneser-Ney n-gram models and cloze scoring.

Counts come from sentences padded with ``order-1`` start symbols and one end
symbol; tokens seen fewer than MIN_COUNT times map to ``<unk>``. Lower-order
distributions use continuation counts derived from the next order up, and the
recursion terminates in a uniform distribution over the predictable
vocabulary (everything but ``<s>``), so every conditional distribution sums
to one and the start symbol itself has probability zero as a prediction.

A cloze candidate is scored as the product of the probabilities of every
order-sized window that covers the blank (a pseudo-likelihood that uses right
context the way a masked LM does), divided by the candidate's probability
under a background unigram table.
"""

import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path

from .corpus import MediaDietDataset
from .errors import (
    EmptyDatasetError,
    MediaDietError,
    MultiTokenCandidateError,
    PromptFormatError,
)
from .text import tokenize

log = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

MIN_COUNT = 2
DEFAULT_DISCOUNT = 0.75
FORMAT_VERSION = "kn-counts-v1"

BLANK = "[BLANK]"


class NGramModel:
    """Immutable interpolated Kneser-Ney model over one dataset's counts.

    Only the raw highest-order counts are serialized; continuation tables are
    re-derived deterministically on load.
    """

    def __init__(self, order: int, discount: float, dataset_id: str,
                 vocab: set[str], counts: dict[tuple[str, ...], dict[str, int]]):
        if order < 2:
            raise MediaDietError("order must be >= 2")
        if not (0.0 < discount < 1.0):
            raise MediaDietError("discount must be in (0, 1)")
        self.order = order
        self.discount = discount
        self.dataset_id = dataset_id
        self.vocab = set(vocab) | {BOS, EOS, UNK}
        self.counts = counts
        # Vocabulary the model can predict: everything but the start pad.
        self._predictable = sorted(self.vocab - {BOS})
        self._build_tables()

    # -- table construction -------------------------------------------------

    def _build_tables(self):
        # self._tables[n] maps (n-1)-token context -> {word: count}. Top level
        # holds raw counts; each lower level holds continuation counts: the
        # number of distinct one-token left extensions seen one level up.
        self._tables: dict[int, dict[tuple[str, ...], dict[str, int]]] = {
            self.order: self.counts}
        for n in range(self.order - 1, 0, -1):
            upper = self._tables[n + 1]
            table: dict[tuple[str, ...], dict[str, int]] = defaultdict(dict)
            # Each distinct type one level up contributes one left extension.
            for ctx, dist in upper.items():
                for w in dist:
                    key = ctx[1:] + (w,)
                    sub = table[key[:-1]]
                    sub[key[-1]] = sub.get(key[-1], 0) + 1
            self._tables[n] = dict(table)
        self._totals = {
            n: {ctx: sum(dist.values()) for ctx, dist in tbl.items()}
            for n, tbl in self._tables.items()
        }

    # -- probabilities -------------------------------------------------------

    def _map(self, token: str) -> str:
        return token if token in self.vocab else UNK

    def prob(self, context: list[str] | tuple[str, ...], word: str) -> float:
        """Interpolated-KN probability of ``word`` after ``context``.

        Context is truncated to the last ``order-1`` tokens and left-padded
        with ``<s>`` when shorter; out-of-vocabulary tokens (either side)
        take the ``<unk>`` path. ``<s>`` is never predicted.
        """
        if word == BOS:
            return 0.0
        ctx = tuple(self._map(t) for t in context)[-(self.order - 1):]
        if len(ctx) < self.order - 1:
            ctx = (BOS,) * (self.order - 1 - len(ctx)) + ctx
        return self._prob_level(self.order, ctx, self._map(word))

    def _prob_level(self, n: int, ctx: tuple[str, ...], word: str) -> float:
        if n == 1:
            table = self._tables[1].get((), {})
            total = self._totals[1].get((), 0)
            uniform = 1.0 / len(self._predictable)
            if total == 0:
                return uniform
            c = table.get(word, 0)
            lam = self.discount * len(table) / total
            return max(c - self.discount, 0.0) / total + lam * uniform
        sub = ctx[-(n - 1):]
        dist = self._tables[n].get(sub)
        if not dist:
            # Unseen context at this order contributes no mass: back off fully.
            return self._prob_level(n - 1, ctx, word)
        total = self._totals[n][sub]
        c = dist.get(word, 0)
        lam = self.discount * len(dist) / total
        return max(c - self.discount, 0.0) / total + lam * self._prob_level(n - 1, ctx, word)

    def distribution(self, context: list[str] | tuple[str, ...]) -> dict[str, float]:
        """P(w | context) for every predictable vocabulary entry."""
        return {w: self.prob(context, w) for w in self._predictable}

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        items = sorted((list(ctx), w, c)
                       for ctx, dist in self.counts.items()
                       for w, c in dist.items())
        return {
            "format": FORMAT_VERSION,
            "order": self.order,
            "discount": self.discount,
            "dataset_id": self.dataset_id,
            "vocab": sorted(self.vocab),
            "counts": items,
        }

    def save(self, path: str | Path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_dict(), f, sort_keys=True, ensure_ascii=False)
            f.write("\n")

    @classmethod
    def from_json_dict(cls, d: dict) -> "NGramModel":
        if d.get("format") != FORMAT_VERSION:
            raise MediaDietError(f"unsupported model format {d.get('format')!r}")
        counts: dict[tuple[str, ...], dict[str, int]] = defaultdict(dict)
        for ctx, w, c in d["counts"]:
            counts[tuple(ctx)][w] = int(c)
        return cls(order=int(d["order"]), discount=float(d["discount"]),
                   dataset_id=d["dataset_id"], vocab=set(d["vocab"]),
                   counts=dict(counts))

    @classmethod
    def load(cls, path: str | Path) -> "NGramModel":
        with open(path, encoding="utf-8") as f:
            return cls.from_json_dict(json.load(f))


def train_ngram(dataset: MediaDietDataset, order: int = 3,
                discount: float = DEFAULT_DISCOUNT) -> NGramModel:
    """Count n-grams over padded, unk-mapped sentences and build the model."""
    if len(dataset) == 0:
        raise EmptyDatasetError(f"dataset {dataset.manifest.dataset_id!r} is empty")
    token_counts: Counter[str] = Counter()
    for toks in dataset.iter_token_lists():
        token_counts.update(toks)
    vocab = {t for t, c in token_counts.items() if c >= MIN_COUNT}
    counts: dict[tuple[str, ...], dict[str, int]] = defaultdict(dict)
    for toks in dataset.iter_token_lists():
        mapped = [t if t in vocab else UNK for t in toks]
        padded = [BOS] * (order - 1) + mapped + [EOS]
        for i in range(order - 1, len(padded)):
            ctx = tuple(padded[i - order + 1:i])
            w = padded[i]
            dist = counts[ctx]
            dist[w] = dist.get(w, 0) + 1
    return NGramModel(order=order, discount=discount,
                      dataset_id=dataset.manifest.dataset_id,
                      vocab=vocab, counts=dict(counts))


def ngram_prob(model: NGramModel, context: list[str], word: str) -> float:
    return model.prob(context, word)


# -- background unigrams -----------------------------------------------------


@dataclass(frozen=True)
class BackgroundUnigrams:
    """Token -> probability table used to normalize n-gram cloze scores."""

    freq: dict
    floor: float = 1e-9

    def __post_init__(self):
        if self.floor <= 0:
            raise MediaDietError("floor must be positive")
        total = sum(self.freq.values())
        if total > 1.0 + 1e-6:
            raise MediaDietError(f"background probabilities sum to {total}, > 1")
        for t, p in self.freq.items():
            if p <= 0:
                raise MediaDietError(f"background probability for {t!r} must be positive")

    def prob(self, token: str) -> float:
        return self.freq.get(token, self.floor)

    @classmethod
    def load_tsv(cls, path: str | Path, floor: float = 1e-9) -> "BackgroundUnigrams":
        freq = {}
        with open(path, encoding="utf-8") as f:
            for i, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise MediaDietError(f"{path}: line {i}: expected 'token<TAB>prob'")
                freq[parts[0]] = float(parts[1])
        return cls(freq=freq, floor=floor)

    def save_tsv(self, path: str | Path):
        with open(path, "w", encoding="utf-8") as f:
            for t in sorted(self.freq):
                f.write(f"{t}\t{self.freq[t]!r}\n")


def unigrams_from_dataset(dataset: MediaDietDataset, floor: float = 1e-9) -> BackgroundUnigrams:
    """Corpus-derived stand-in for an external background table."""
    counts: Counter[str] = Counter()
    for toks in dataset.iter_token_lists():
        counts.update(toks)
    total = sum(counts.values())
    if total == 0:
        raise EmptyDatasetError("cannot derive unigrams from an empty dataset")
    return BackgroundUnigrams(freq={t: c / total for t, c in counts.items()}, floor=floor)


# -- cloze scoring -----------------------------------------------------------


def split_template(template: str) -> tuple[list[str], list[str]]:
    """Tokenize the text left and right of the single blank marker."""
    parts = template.split(BLANK)
    if len(parts) != 2:
        raise PromptFormatError(
            f"template must contain exactly one {BLANK}, found {len(parts) - 1}")
    return tokenize(parts[0]), tokenize(parts[1])


def candidate_token(candidate: str) -> str:
    """Normalize a cloze candidate to one token; reserved symbols pass through."""
    if candidate in (BOS, EOS, UNK):
        return candidate
    toks = tokenize(candidate)
    if len(toks) != 1:
        raise MultiTokenCandidateError(
            f"candidate {candidate!r} tokenizes to {len(toks)} tokens")
    return toks[0]


def cloze_windows(model: NGramModel, template: str, candidate: str) -> list[float]:
    """Probabilities of every order-sized window covering the blank.

    The candidate fills the blank; the sentence is padded like training data,
    so windows near the start keep full left context, while windows that
    would run past the end symbol are dropped (edge truncation).
    """
    cand = candidate_token(candidate)
    if cand not in model.vocab:
        log.warning("candidate %r not in model vocabulary; scoring via %s", cand, UNK)
    left, right = split_template(template)
    n = model.order
    padded = [BOS] * (n - 1) + left + [cand] + right + [EOS]
    blank_at = (n - 1) + len(left)
    probs = []
    for start in range(blank_at - n + 1, blank_at + 1):
        if start < 0 or start + n > len(padded):
            continue
        window = padded[start:start + n]
        probs.append(model.prob(window[:-1], window[-1]))
    return probs


def cloze_window_product(model: NGramModel, template: str, candidate: str) -> float:
    prod = 1.0
    for p in cloze_windows(model, template, candidate):
        prod *= p
    return prod


def ngram_cloze_score(model: NGramModel, bg: BackgroundUnigrams,
                      template: str, candidate: str) -> float:
    """Window-product pseudo-likelihood over the background unigram probability."""
    return cloze_window_product(model, template, candidate) / bg.prob(candidate_token(candidate))
