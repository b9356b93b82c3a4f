"""Rolling time-series predictions from dated media-diet models.

Each (window, backend) pair yields one predicted proportion per prompt
target by scoring the prompt against that window's model and pushing the
score through a previously fitted regression. Windows with no model are
recorded as gaps, never interpolated. Available ground-truth survey points
are overlaid by field date.
"""

import datetime as dt
from typing import Sequence

import numpy as np
import pandas as pd

from ..errors import MediaDietError
from ..probe import PromptSpec, media_diet_score
from .regression import SCORE, RegressionFit

ROLLING_COLUMNS = ["window_start", "window_end", "prompt_id", "question_id",
                   "target_word", "answer_label", "score", "prediction_raw",
                   "prediction", "ground_truth", "gap"]


def _validate_windows(windows: Sequence[tuple]):
    prev_end = None
    for start, end in windows:
        if start > end:
            raise MediaDietError(f"window {start}..{end} is inverted")
        if prev_end is not None and start <= prev_end:
            raise MediaDietError(
                f"windows must be sorted and non-overlapping; {start} <= {prev_end}")
        prev_end = end


def rolling_predict(dated_models: Sequence[tuple], prompts: Sequence[PromptSpec],
                    fit: RegressionFit, base_backend, waves=None,
                    client=None) -> pd.DataFrame:
    """Predicted proportions per (window, prompt, target).

    ``dated_models`` is a sorted list of ((start, end), backend) with ``None``
    backends marking missing models. The fit must use only features
    computable here (intercept and the media-diet score). Predictions are
    clipped to [0, 1] at this presentation layer only; the raw value is kept
    alongside.
    """
    windows = [w for w, _ in dated_models]
    _validate_windows(windows)
    unsupported = [f for f in fit.features if f not in ("intercept", SCORE)]
    if unsupported:
        raise MediaDietError(
            f"fit uses features unavailable in rolling prediction: {unsupported}")

    truth = {}
    for w in waves or []:
        for label, p in w.proportions.items():
            truth.setdefault((w.question_id, label), []).append((w.field_date, p))

    rows = []
    for (start, end), backend in dated_models:
        label = f"{start.isoformat()}..{end.isoformat()}"
        for prompt in prompts:
            for target in prompt.targets:
                row = {
                    "window_start": start.isoformat(), "window_end": end.isoformat(),
                    "prompt_id": prompt.prompt_id, "question_id": prompt.question_id,
                    "target_word": target.word, "answer_label": target.answer_label,
                    "score": np.nan, "prediction_raw": np.nan, "prediction": np.nan,
                    "ground_truth": np.nan, "gap": backend is None,
                }
                if backend is not None:
                    rec = media_diet_score(backend, base_backend, prompt, target,
                                           diet_id=label, client=client)
                    frame = pd.DataFrame({"score": [rec.score]})
                    raw = float(fit.predict(frame)[0])
                    row.update(score=rec.score, prediction_raw=raw,
                               prediction=float(np.clip(raw, 0.0, 1.0)))
                points = truth.get((prompt.question_id, target.answer_label), [])
                hits = [p for d, p in points if start <= d <= end]
                if hits:
                    row["ground_truth"] = float(np.mean(hits))
                rows.append(row)
    return pd.DataFrame(rows, columns=ROLLING_COLUMNS)
