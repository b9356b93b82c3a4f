"""Survey-derived cloze prompts and normalized, synonym-grouped scores.

A prompt is a one-blank template with (usually two) opposing single-token
targets. The media-diet score for a target is the adapted model's probability
mass over the target word and its curated synonyms, divided by the base
model's probability of the head word alone.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import pandas as pd

from . import gateway
from .errors import (
    DegenerateDenominatorError,
    HeadWordOOVError,
    MediaDietError,
    MixedProvenanceError,
    PromptFormatError,
)
from .gateway import PROB_FLOOR, BackendRef
from .text import tokenize

log = logging.getLogger(__name__)

BLANK = "[BLANK]"
VARIANTS = ("orig", "synsub", "backtranslation")

SCORE_COLUMNS = [
    "diet_id", "prompt_id", "question_id", "variant", "target_word",
    "answer_label", "base_prob", "score",
    "model_tag_base", "model_tag_diet", "error",
]


def _require_single_token(word: str, what: str) -> str:
    toks = tokenize(word)
    if len(toks) != 1:
        raise PromptFormatError(f"{what} {word!r} is not a single token")
    return toks[0]


@dataclass(frozen=True)
class TargetSpec:
    word: str
    synonyms: tuple[str, ...] = ()
    answer_label: str = ""

    def __post_init__(self):
        _require_single_token(self.word, "target word")
        for s in self.synonyms:
            _require_single_token(s, "synonym")
        if self.word in self.synonyms:
            raise PromptFormatError(f"target word {self.word!r} repeated in its synonyms")


@dataclass(frozen=True)
class PromptSpec:
    prompt_id: str
    template: str
    targets: tuple[TargetSpec, ...]
    question_id: str = ""
    variant: str = "orig"

    def __post_init__(self):
        if self.template.count(BLANK) != 1:
            raise PromptFormatError(
                f"prompt {self.prompt_id!r}: template must contain exactly one "
                f"{BLANK}, found {self.template.count(BLANK)}")
        if not self.targets:
            raise PromptFormatError(f"prompt {self.prompt_id!r}: needs at least one target")
        words = [t.word for t in self.targets]
        if len(set(words)) != len(words):
            raise PromptFormatError(f"prompt {self.prompt_id!r}: target words not distinct")
        if self.variant not in VARIANTS:
            raise PromptFormatError(f"prompt {self.prompt_id!r}: unknown variant "
                                    f"{self.variant!r}")


@dataclass(frozen=True)
class ScoreRecord:
    diet_id: str
    prompt_id: str
    target_word: str
    base_prob: float
    adapted_probs: dict
    score: float
    model_tag_diet: str
    model_tag_base: str


def media_diet_score(diet_backend, base_backend, prompt: PromptSpec,
                     target: TargetSpec, diet_id: str = "",
                     client=None) -> ScoreRecord:
    """Score one (diet, prompt, target) cell.

    Numerator: adapted probabilities summed over the head word and every
    synonym the diet backend can score (unscoreable synonyms are dropped with
    a warning). Denominator: the base model's probability of the head word
    only, floored at PROB_FLOOR; a floored-out denominator is an error, as is
    a head word the diet backend cannot score.
    """
    words = [target.word, *target.synonyms]
    adapted = gateway.fill_probabilities(diet_backend, prompt, words, client=client)
    if target.word in adapted.errors:
        raise HeadWordOOVError(
            f"head word {target.word!r} unsupported by diet backend: "
            f"{adapted.errors[target.word]}")
    for syn, why in adapted.errors.items():
        log.warning("prompt %s: dropping synonym %r: %s", prompt.prompt_id, syn, why)
    base = gateway.fill_probabilities(base_backend, prompt, [target.word], client=client)
    if target.word in base.errors:
        raise HeadWordOOVError(
            f"head word {target.word!r} unsupported by base backend: "
            f"{base.errors[target.word]}")
    base_prob = base.probs[target.word]
    if base_prob <= PROB_FLOOR:
        raise DegenerateDenominatorError(
            f"base probability of {target.word!r} is at the floor ({base_prob}); "
            f"score ratio would be meaningless")
    score = sum(adapted.probs.values()) / base_prob
    if diet_id == "":
        diet_id = adapted.model_tag
    return ScoreRecord(
        diet_id=diet_id, prompt_id=prompt.prompt_id, target_word=target.word,
        base_prob=base_prob, adapted_probs=dict(adapted.probs), score=score,
        model_tag_diet=adapted.model_tag, model_tag_base=base.model_tag)


def score_matrix(diets: Sequence[tuple[str, BackendRef]], prompts: Sequence[PromptSpec],
                 base_backend, client=None) -> pd.DataFrame:
    """One row per (diet × prompt × target), canonically sorted.

    Per-cell failures land in the ``error`` column instead of aborting the
    matrix; failed cells have NaN scores.
    """
    if not diets or not prompts:
        raise MediaDietError("diets and prompts must be non-empty")
    rows = []
    for diet_id, ref in diets:
        for prompt in prompts:
            for target in prompt.targets:
                row = {
                    "diet_id": diet_id, "prompt_id": prompt.prompt_id,
                    "question_id": prompt.question_id, "variant": prompt.variant,
                    "target_word": target.word, "answer_label": target.answer_label,
                    "base_prob": float("nan"), "score": float("nan"),
                    "model_tag_base": "", "model_tag_diet": "", "error": "",
                }
                try:
                    rec = media_diet_score(ref, base_backend, prompt, target,
                                           diet_id=diet_id, client=client)
                    row.update(base_prob=rec.base_prob, score=rec.score,
                               model_tag_base=rec.model_tag_base,
                               model_tag_diet=rec.model_tag_diet)
                except MediaDietError as e:
                    row["error"] = f"{type(e).__name__}: {e}"
                rows.append(row)
    df = pd.DataFrame(rows, columns=SCORE_COLUMNS)
    df = df.sort_values(["diet_id", "prompt_id", "target_word"], kind="mergesort")
    return df.reset_index(drop=True)


def validate_provenance(scores: pd.DataFrame):
    """Refuse mixed model tags: one base tag overall, one diet tag per diet."""
    ok = scores[scores["error"] == ""] if "error" in scores.columns else scores
    base_tags = set(ok["model_tag_base"]) - {""}
    if len(base_tags) > 1:
        raise MixedProvenanceError(f"multiple base model tags in one table: {sorted(base_tags)}")
    for diet_id, grp in ok.groupby("diet_id"):
        tags = set(grp["model_tag_diet"]) - {""}
        if len(tags) > 1:
            raise MixedProvenanceError(
                f"diet {diet_id!r} carries multiple model tags: {sorted(tags)}")


def write_scores_csv(scores: pd.DataFrame, path: str | Path):
    scores.to_csv(path, index=False, lineterminator="\n")


def read_scores_csv(path: str | Path) -> pd.DataFrame:
    df = pd.read_csv(path, keep_default_na=False,
                     dtype={c: str for c in ("diet_id", "prompt_id", "question_id",
                                             "variant", "target_word", "answer_label",
                                             "model_tag_base", "model_tag_diet", "error")})
    df["base_prob"] = pd.to_numeric(df["base_prob"], errors="coerce")
    df["score"] = pd.to_numeric(df["score"], errors="coerce")
    return df


# -- prompt and synonym files --------------------------------------------------


def load_synonym_lexicon(path: str | Path) -> dict[str, list[str]]:
    with open(path, encoding="utf-8") as f:
        lex = json.load(f)
    if not isinstance(lex, dict):
        raise MediaDietError(f"{path}: synonym lexicon must be a JSON object")
    return {str(k): [str(s) for s in v] for k, v in lex.items()}


def _target_from_dict(d: dict, lexicon: dict[str, list[str]] | None) -> TargetSpec:
    word = str(d["word"])
    synonyms = [str(s) for s in d.get("synonyms", [])]
    if not synonyms and lexicon is not None:
        raw = lexicon.get(word, [])
        synonyms = []
        for s in raw:
            if len(tokenize(s)) != 1:
                log.warning("dropping multiword synonym %r for %r", s, word)
                continue
            synonyms.append(s)
    return TargetSpec(word=word, synonyms=tuple(synonyms),
                      answer_label=str(d.get("answer_label", word)))


def load_prompts(path: str | Path,
                 lexicon: dict[str, list[str]] | None = None) -> list[PromptSpec]:
    """Read a JSON list of prompts, filling synonyms from the lexicon when absent."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, list):
        raise MediaDietError(f"{path}: prompts file must be a JSON list")
    prompts = []
    for d in raw:
        prompts.append(PromptSpec(
            prompt_id=str(d["prompt_id"]),
            template=str(d["template"]),
            targets=tuple(_target_from_dict(t, lexicon) for t in d["targets"]),
            question_id=str(d.get("question_id", "")),
            variant=str(d.get("variant", "orig")),
        ))
    return prompts


def save_prompts(prompts: Sequence[PromptSpec], path: str | Path):
    out = []
    for p in prompts:
        out.append({
            "prompt_id": p.prompt_id, "template": p.template,
            "question_id": p.question_id, "variant": p.variant,
            "targets": [{"word": t.word, "synonyms": list(t.synonyms),
                         "answer_label": t.answer_label} for t in p.targets],
        })
    with open(path, "w", encoding="utf-8") as f:
        json.dump(out, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
