"""Synthetic-world generators with exported ground truth.

Everything here is a pure function of its spec and seed: corpora drawn from a
declared token distribution (with the exact empirical counts returned for
oracle use), survey waves generated from a planted linear model, and the
drifting weekly corpora used to exercise rolling predictions. Proportions are
clipped to [0, 1] here, in the generator, and nowhere else.
"""

import datetime as dt
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .corpus import CorpusManifest, MediaDietDataset, SentenceRecord
from .errors import MediaDietError
from .survey import SurveyWave

DEMOGRAPHIC_FACTORS = {"age": 4, "edu": 3, "race": 4, "sex": 2}


@dataclass(frozen=True)
class SynthSpec:
    token_distribution: dict
    n_sentences: int
    sentence_length: int = 10
    seed: int = 0
    dataset_id: str = "synth"
    outlet: str = "SYNTH"
    medium: str = "web"

    def __post_init__(self):
        total = sum(self.token_distribution.values())
        if abs(total - 1.0) > 1e-9:
            raise MediaDietError(f"token distribution sums to {total}, not 1")
        if self.n_sentences < 0 or self.sentence_length < 1:
            raise MediaDietError("n_sentences must be >= 0 and sentence_length >= 1")


def _synth_manifest(spec: SynthSpec, n_sentences: int) -> CorpusManifest:
    return CorpusManifest(
        dataset_id=spec.dataset_id, outlet=spec.outlet, medium=spec.medium,
        topic="synthetic", window_start=dt.date(2020, 1, 1),
        window_end=dt.date(2020, 12, 31), doc_count=1 if n_sentences else 0,
        sentence_count=n_sentences)


def gen_corpus(spec: SynthSpec) -> tuple[MediaDietDataset, Counter]:
    """Sentences of i.i.d. tokens; returns the exact empirical token counts too."""
    rng = np.random.default_rng(spec.seed)
    tokens = sorted(spec.token_distribution)
    probs = np.array([spec.token_distribution[t] for t in tokens])
    counts: Counter = Counter()
    sentences = []
    for i in range(spec.n_sentences):
        draw = rng.choice(len(tokens), size=spec.sentence_length, p=probs)
        toks = tuple(tokens[j] for j in draw)
        counts.update(toks)
        sentences.append(SentenceRecord(
            sent_id=f"synth:{i:06d}", doc_id="synth", text=" ".join(toks),
            tokens=toks))
    dataset = MediaDietDataset(manifest=_synth_manifest(spec, len(sentences)),
                               sentences=sentences)
    return dataset, counts


def sample_demographics(rng: np.random.Generator) -> dict:
    """One draw of demographic bucket proportions: a Dirichlet per factor."""
    out = {}
    for factor, bands in DEMOGRAPHIC_FACTORS.items():
        shares = rng.dirichlet(np.ones(bands))
        for b in range(bands):
            out[f"{factor}{b + 1}"] = float(shares[b])
    return out


@dataclass
class SurveyGenParams:
    coefficients: dict
    noise_sd: float
    seed: int
    attention_range: tuple = (0.2, 0.8)

    def to_json_dict(self) -> dict:
        return {"coefficients": dict(self.coefficients), "noise_sd": self.noise_sd,
                "seed": self.seed, "attention_range": list(self.attention_range),
                "demographic_factors": DEMOGRAPHIC_FACTORS}


def gen_survey(scores: pd.DataFrame, coefficients: dict, noise_sd: float,
               seed: int, field_date: dt.date = dt.date(2020, 4, 20),
               diet_dates: dict | None = None) -> tuple[list[SurveyWave], SurveyGenParams]:
    """Waves whose proportions follow a planted linear model of the scores.

    proportion = clip(intercept + Σ beta·feature + N(0, noise_sd), 0, 1).
    Supported coefficient keys: intercept, score, attention,
    score_x_attention, and demographic bucket names (age1, edu2, ...).
    Attention and demographics are sampled per (diet, question) from declared
    priors; all generator parameters are returned for export.
    """
    params = SurveyGenParams(coefficients=coefficients, noise_sd=noise_sd, seed=seed)
    rng = np.random.default_rng(seed)
    usable = scores[scores["error"] == ""] if "error" in scores.columns else scores
    waves = []
    lo, hi = params.attention_range
    for (diet_id, question_id), grp in usable.groupby(["diet_id", "question_id"],
                                                      sort=True):
        attention = float(rng.uniform(lo, hi))
        demo = sample_demographics(rng)
        proportions = {}
        for _, row in grp.sort_values("target_word").iterrows():
            features = {"intercept": 1.0, "score": float(row["score"]),
                        "attention": attention,
                        "score_x_attention": float(row["score"]) * attention, **demo}
            mean = 0.0
            for name, beta in coefficients.items():
                if name not in features:
                    raise MediaDietError(f"unknown coefficient {name!r}")
                mean += beta * features[name]
            value = mean + rng.normal(0.0, noise_sd) if noise_sd > 0 else mean
            proportions[str(row["answer_label"])] = float(np.clip(value, 0.0, 1.0))
        waves.append(SurveyWave(
            wave_id=f"synthwave-{diet_id}", diet_id=diet_id, question_id=question_id,
            field_date=(diet_dates or {}).get(diet_id, field_date),
            proportions=proportions, attention_very_close=attention,
            demographics=demo))
    return waves, params


def save_survey_params(params: SurveyGenParams, path: str | Path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(params.to_json_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


@dataclass(frozen=True)
class DriftSpec:
    """Weekly two-template world where one target word decays in frequency."""

    n_windows: int = 26
    sentences_per_window: int = 400
    start: dt.date = dt.date(2020, 1, 6)
    fading_word: str = "minor"
    rising_word: str = "major"
    start_share: float = 0.9
    end_share: float = 0.1
    seed: int = 0
    template: tuple = ("the outbreak is a", "threat to the population")


def gen_drifting_corpora(spec: DriftSpec) -> list[tuple[tuple, MediaDietDataset]]:
    """One dataset per week; the fading word's share declines linearly."""
    out = []
    left, right = spec.template
    for w in range(spec.n_windows):
        frac = w / max(spec.n_windows - 1, 1)
        share = spec.start_share + (spec.end_share - spec.start_share) * frac
        n_fade = round(spec.sentences_per_window * share)
        start = spec.start + dt.timedelta(weeks=w)
        end = start + dt.timedelta(days=6)
        sentences = []
        for i in range(spec.sentences_per_window):
            word = spec.fading_word if i < n_fade else spec.rising_word
            text = f"{left} {word} {right}"
            toks = tuple(text.split())
            sentences.append(SentenceRecord(
                sent_id=f"w{w:02d}:{i:05d}", doc_id=f"w{w:02d}", text=text,
                tokens=toks))
        manifest = CorpusManifest(
            dataset_id=f"drift-w{w:02d}", outlet="SYNTH", medium="web",
            topic="drift", window_start=start, window_end=end,
            doc_count=1, sentence_count=len(sentences))
        out.append(((start, end), MediaDietDataset(manifest=manifest,
                                                   sentences=sentences)))
    return out
