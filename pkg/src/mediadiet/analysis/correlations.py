"""Pearson correlations with percentile-bootstrap confidence intervals."""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..errors import MediaDietError, ZeroVarianceError
from .seeds import derive_seed

log = logging.getLogger(__name__)

DEFAULT_B = 2000

GROUP_COLUMNS = {
    "question_category": "category",
    "topic": "topic",
    "diet_medium": "medium",
    "model_variant": "variant",
}


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    ci_low: float
    ci_high: float
    n: int
    B: int
    seed: int

    def __post_init__(self):
        if self.ci_low > self.ci_high:
            raise MediaDietError("ci_low > ci_high")


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    r = float((xc @ yc) / np.sqrt((xc @ xc) * (yc @ yc)))
    return min(1.0, max(-1.0, r))  # roundoff can graze past the bounds


def _rowwise_pearson(xb: np.ndarray, yb: np.ndarray) -> np.ndarray:
    xc = xb - xb.mean(axis=1, keepdims=True)
    yc = yb - yb.mean(axis=1, keepdims=True)
    num = (xc * yc).sum(axis=1)
    den = np.sqrt((xc ** 2).sum(axis=1) * (yc ** 2).sum(axis=1))
    out = np.full(len(xb), np.nan)
    ok = den > 0
    out[ok] = np.clip(num[ok] / den[ok], -1.0, 1.0)
    return out


def pearson_bootstrap(x, y, B: int = DEFAULT_B, seed: int = 0) -> CorrelationResult:
    """Sample Pearson r with a 95% percentile CI over B row resamples.

    Replicate b uses row b of one index matrix drawn from the seed, so the
    result is identical however the replicates are scheduled. Degenerate
    resamples (zero variance) are excluded from the quantiles.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise MediaDietError("x and y must be 1-D arrays of the same length")
    n = len(x)
    if n < 3:
        raise MediaDietError(f"need at least 3 points, got {n}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise MediaDietError("inputs must be finite")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ZeroVarianceError("correlation undefined: an input is constant")
    r = _pearson(x, y)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(B, n))
    rb = _rowwise_pearson(x[idx], y[idx])
    lo, hi = np.nanquantile(rb, [0.025, 0.975])
    return CorrelationResult(r=r, ci_low=float(lo), ci_high=float(hi),
                             n=n, B=B, seed=seed)


def grouped_correlations(data: pd.DataFrame, group_by: str,
                         B: int = DEFAULT_B, seed: int = 0,
                         min_n: int = 3) -> tuple[list, list]:
    """Per-group score/proportion correlations.

    Returns (results, skipped): results is a sorted list of
    (group, CorrelationResult); groups below ``min_n`` rows are skipped and
    reported with their size. Each group gets a seed derived from the master
    seed and the group name.
    """
    if group_by not in GROUP_COLUMNS:
        raise MediaDietError(f"group_by must be one of {sorted(GROUP_COLUMNS)}, "
                             f"got {group_by!r}")
    column = GROUP_COLUMNS[group_by]
    if column not in data.columns:
        raise MediaDietError(f"analysis dataset has no {column!r} column")
    results = []
    skipped = []
    for group, grp in sorted(data.groupby(column), key=lambda kv: str(kv[0])):
        if len(grp) < min_n:
            skipped.append((group, len(grp)))
            log.info("grouped_correlations: skipping %r (n=%d < %d)",
                     group, len(grp), min_n)
            continue
        res = pearson_bootstrap(grp["score"].to_numpy(), grp["proportion"].to_numpy(),
                                B=B, seed=derive_seed(seed, "group", group_by, group))
        results.append((group, res))
    return results, skipped


def correlations_to_frame(results: list) -> pd.DataFrame:
    rows = [{"group": g, "r": c.r, "ci_low": c.ci_low, "ci_high": c.ci_high,
             "n": c.n} for g, c in results]
    return pd.DataFrame(rows, columns=["group", "r", "ci_low", "ci_high", "n"])
