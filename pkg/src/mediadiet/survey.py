"""Survey response data, media-diet subpopulation construction, and the join
between score tables and survey proportions.

Survey inputs arrive as long-format CSV with a declared column mapping
(provider exports vary too much for a fixed schema). The join produces the
analysis dataset: one row per (diet, question, target) with the survey
proportion, attention covariate, demographic proportions, and field date.
"""

import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import pandas as pd

from .errors import MediaDietError, MisalignedJoinError, UnmatchedKeysError

log = logging.getLogger(__name__)

QUESTION_CATEGORIES = ("ego_retro", "ego_pro", "socio_retro", "socio_pro")


@dataclass(frozen=True)
class SurveyQuestion:
    question_id: str
    text: str
    choices: tuple[str, ...]
    opposing_pair: tuple[int, int]
    category: str = ""
    topic: str = ""

    def __post_init__(self):
        i, j = self.opposing_pair
        if i == j or not (0 <= i < len(self.choices)) or not (0 <= j < len(self.choices)):
            raise MediaDietError(
                f"question {self.question_id!r}: opposing_pair {self.opposing_pair} "
                f"invalid for {len(self.choices)} choices")
        if self.category and self.category not in QUESTION_CATEGORIES:
            raise MediaDietError(f"question {self.question_id!r}: unknown category "
                                 f"{self.category!r}")


@dataclass(frozen=True)
class SurveyWave:
    wave_id: str
    field_date: dt.date
    diet_id: str
    question_id: str
    proportions: dict
    attention_very_close: float = float("nan")
    demographics: dict = field(default_factory=dict)

    def __post_init__(self):
        total = 0.0
        for choice, p in self.proportions.items():
            if not (0.0 <= p <= 1.0):
                raise MediaDietError(
                    f"wave {self.wave_id!r}: proportion for {choice!r} out of [0,1]: {p}")
            total += p
        # Nonresponse keeps the sum below 1; above 1 is a data error.
        if total > 1.0 + 1e-9:
            raise MediaDietError(
                f"wave {self.wave_id!r} question {self.question_id!r}: proportions "
                f"sum to {total} > 1")


@dataclass(frozen=True)
class RespondentBucket:
    bucket_key: tuple
    outlet_shares: dict

    def __post_init__(self):
        for outlet, share in self.outlet_shares.items():
            if not (0.0 <= share <= 1.0):
                raise MediaDietError(f"bucket {self.bucket_key}: share for "
                                     f"{outlet!r} out of [0,1]: {share}")


@dataclass
class BucketLinkResult:
    groups: dict  # diet_id -> sorted list of bucket_keys
    excluded: list  # bucket_keys with no primary source


def link_media_diet_buckets(buckets: Sequence[RespondentBucket],
                            threshold: float = 0.5) -> BucketLinkResult:
    """Group demographic buckets into media diets by primary news source.

    A bucket's primary sources are the outlets used by at least ``threshold``
    of its respondents (>= , so exactly 50% counts). Buckets sharing the same
    primary-source set merge into one diet group named by the sorted outlets;
    buckets with no primary source are excluded and reported.
    """
    groups: dict[str, list] = {}
    excluded = []
    for b in buckets:
        primary = frozenset(o for o, share in b.outlet_shares.items()
                            if share >= threshold)
        if not primary:
            excluded.append(b.bucket_key)
            continue
        diet_id = "+".join(sorted(primary))
        groups.setdefault(diet_id, []).append(b.bucket_key)
    for v in groups.values():
        v.sort()
    if excluded:
        log.info("bucket linking: %d buckets had no primary source", len(excluded))
    return BucketLinkResult(groups=dict(sorted(groups.items())), excluded=sorted(excluded))


# -- survey CSV loading --------------------------------------------------------

REQUIRED_MAPPING = ("wave_id", "field_date", "diet_id", "question_id",
                    "choice", "proportion")

# Column names of the toolkit's own long-format wave CSV.
CANONICAL_MAPPING = {k: k for k in REQUIRED_MAPPING} | {"attention": "attention"}


def write_waves_csv(waves: Sequence[SurveyWave], path: str | Path):
    """Long-format canonical dump: one row per (wave, diet, question, choice)."""
    demo_names = sorted({name for w in waves for name in w.demographics})
    rows = []
    for w in sorted(waves, key=lambda w: (w.diet_id, w.question_id, w.wave_id)):
        for choice in sorted(w.proportions):
            row = {
                "wave_id": w.wave_id, "field_date": w.field_date.isoformat(),
                "diet_id": w.diet_id, "question_id": w.question_id,
                "choice": choice, "proportion": w.proportions[choice],
                "attention": w.attention_very_close,
            }
            for name in demo_names:
                row[name] = w.demographics.get(name, float("nan"))
            rows.append(row)
    columns = list(CANONICAL_MAPPING.values()) + demo_names
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False, lineterminator="\n")


def load_canonical_waves_csv(path: str | Path) -> list[SurveyWave]:
    df = pd.read_csv(path, nrows=0)
    demo_cols = [c for c in df.columns if c not in CANONICAL_MAPPING.values()]
    mapping = dict(CANONICAL_MAPPING)
    mapping["demographics"] = demo_cols
    return load_waves_csv(path, mapping)


def load_waves_csv(path: str | Path, mapping: dict) -> list[SurveyWave]:
    """Read long-format survey CSV using a declared column mapping.

    ``mapping`` names the source column for each required field, optionally
    ``attention`` and a ``demographics`` list of columns carried through as
    bucket proportions.
    """
    for key in REQUIRED_MAPPING:
        if key not in mapping:
            raise MediaDietError(f"survey column mapping is missing {key!r}")
    df = pd.read_csv(path)
    for key in REQUIRED_MAPPING:
        if mapping[key] not in df.columns:
            raise MediaDietError(
                f"survey CSV {path} has no column {mapping[key]!r} (mapped from {key!r})")
    demo_cols = list(mapping.get("demographics", []))
    attention_col = mapping.get("attention")
    waves = []
    group_cols = [mapping["wave_id"], mapping["field_date"], mapping["diet_id"],
                  mapping["question_id"]]
    for (wave_id, date_str, diet_id, question_id), grp in df.groupby(group_cols, sort=True):
        proportions = {str(c): float(p) for c, p in
                       zip(grp[mapping["choice"]], grp[mapping["proportion"]])}
        attention = float(grp[attention_col].iloc[0]) if attention_col else float("nan")
        demographics = {c: float(grp[c].iloc[0]) for c in demo_cols}
        waves.append(SurveyWave(
            wave_id=str(wave_id), field_date=dt.date.fromisoformat(str(date_str)),
            diet_id=str(diet_id), question_id=str(question_id),
            proportions=proportions, attention_very_close=attention,
            demographics=demographics))
    return waves


# -- the join ------------------------------------------------------------------


def join_scores_responses(scores: pd.DataFrame, waves: Iterable[SurveyWave],
                          questions: Sequence[SurveyQuestion] | None = None,
                          diet_media: dict | None = None,
                          diet_windows: dict | None = None,
                          allow_misaligned: bool = False) -> pd.DataFrame:
    """Join score rows with survey proportions into the analysis dataset.

    Every non-error score row must match a wave on (diet_id, question_id)
    with a proportion recorded for its answer_label; unmatched keys are
    reported exhaustively. When ``diet_windows`` maps diet_id to a
    (start, end) date pair, joins where the model window does not precede the
    survey field date are rejected unless ``allow_misaligned``. Output has
    exactly two rows per (diet, question): one per opposing target.
    """
    wave_index: dict[tuple, SurveyWave] = {}
    for w in waves:
        key = (w.diet_id, w.question_id)
        if key in wave_index:
            raise MediaDietError(f"duplicate wave for {key}")
        wave_index[key] = w
    qmeta = {q.question_id: q for q in (questions or [])}

    usable = scores[scores["error"] == ""] if "error" in scores.columns else scores
    unmatched = []
    misaligned = []
    rows = []
    demo_names: list[str] = []
    for _, s in usable.iterrows():
        key = (s["diet_id"], s["question_id"])
        wave = wave_index.get(key)
        if wave is None or s["answer_label"] not in wave.proportions:
            unmatched.append((s["diet_id"], s["question_id"], s["answer_label"]))
            continue
        if diet_windows is not None and s["diet_id"] in diet_windows:
            window_end = diet_windows[s["diet_id"]][1]
            if window_end > wave.field_date:
                misaligned.append((s["diet_id"], str(window_end), str(wave.field_date)))
                if not allow_misaligned:
                    continue
                log.warning("keeping misaligned row: diet %s window ends %s, "
                            "survey fielded %s", s["diet_id"], window_end,
                            wave.field_date)
        q = qmeta.get(s["question_id"])
        row = {
            "diet_id": s["diet_id"], "question_id": s["question_id"],
            "prompt_id": s.get("prompt_id", ""), "target_word": s["target_word"],
            "answer_label": s["answer_label"], "variant": s.get("variant", "orig"),
            "score": float(s["score"]), "base_prob": float(s["base_prob"]),
            "proportion": wave.proportions[s["answer_label"]],
            "attention": wave.attention_very_close,
            "date": wave.field_date,
            "category": q.category if q else "",
            "topic": q.topic if q else "",
            "medium": (diet_media or {}).get(s["diet_id"], ""),
        }
        for name, value in sorted(wave.demographics.items()):
            col = f"demo_{name}"
            if col not in demo_names:
                demo_names.append(col)
            row[col] = value
        rows.append(row)
    if unmatched:
        raise UnmatchedKeysError(sorted(set(unmatched)))
    if misaligned and not allow_misaligned:
        raise MisalignedJoinError(
            f"{len(misaligned)} rows where the model window ends after the survey "
            f"date, e.g. {misaligned[0]}; pass allow_misaligned to keep them")
    base_cols = ["diet_id", "question_id", "prompt_id", "target_word", "answer_label",
                 "variant", "score", "base_prob", "proportion", "attention", "date",
                 "category", "topic", "medium"]
    out = pd.DataFrame(rows, columns=base_cols + sorted(demo_names))
    out = out.sort_values(["diet_id", "question_id", "target_word"], kind="mergesort")
    out = out.reset_index(drop=True)
    counts = out.groupby(["diet_id", "question_id"]).size()
    off = counts[counts != 2]
    if len(off):
        raise MediaDietError(
            "the analysis design needs exactly two rows (opposing targets) per "
            f"(diet, question); violations: {off.index.tolist()[:10]}")
    return out
