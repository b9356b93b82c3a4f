"""OLS with row-bootstrap confidence intervals.

Model 1 regresses survey proportions on the media-diet score alone; Model 2
adds attention to news, the score-attention interaction, and whatever
demographic proportion columns the dataset carries. Fits use an SVD
least-squares solve, so rank-deficient designs (collinear demographics) get
the minimum-norm solution instead of an error. "Error" means in-sample RMSE,
this toolkit's definition, and reports label it as such.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import MediaDietError, TooFewRowsError
from .seeds import derive_seed

log = logging.getLogger(__name__)

DEFAULT_B = 2000
MODELS = ("model1", "model2")

SCORE = "media_diet_score"
ATTENTION = "attention"
INTERACTION = "media_diet_score_x_attention"

# Bootstrap replicates processed per vectorized batch (memory bound).
_CHUNK = 256


def design_matrix(data: pd.DataFrame, model: str) -> tuple[np.ndarray, list[str]]:
    if model not in MODELS:
        raise MediaDietError(f"model must be one of {MODELS}, got {model!r}")
    n = len(data)
    columns = [("intercept", np.ones(n)), (SCORE, data["score"].to_numpy(float))]
    if model == "model2":
        for need in ("attention",):
            if need not in data.columns or data[need].isna().any():
                raise MediaDietError("model2 requires a complete attention column")
        att = data["attention"].to_numpy(float)
        score = data["score"].to_numpy(float)
        columns.append((ATTENTION, att))
        columns.append((INTERACTION, score * att))
        demo_cols = sorted(c for c in data.columns if c.startswith("demo_"))
        if not demo_cols:
            raise MediaDietError("model2 requires demographic proportion columns")
        for c in demo_cols:
            columns.append((c, data[c].to_numpy(float)))
    names = [name for name, _ in columns]
    X = np.column_stack([v for _, v in columns])
    if not np.all(np.isfinite(X)):
        raise MediaDietError("design matrix contains non-finite values")
    return X, names


@dataclass
class RegressionFit:
    model: str
    features: list[str]
    coefficients: dict
    ci: dict
    stars: dict
    r_squared: float
    error: float
    error_ci: tuple
    n: int
    B: int
    seed: int
    rank: int
    _beta: np.ndarray = field(repr=False, default=None)

    def predict_design(self, X: np.ndarray) -> np.ndarray:
        return X @ self._beta

    def predict(self, data: pd.DataFrame) -> np.ndarray:
        X, names = design_matrix(data, self.model)
        if names != self.features:
            raise MediaDietError(
                f"fit was trained on features {self.features}, data provides {names}")
        return self.predict_design(X)

    def to_json_dict(self) -> dict:
        return {
            "model": self.model, "features": self.features,
            "coefficients": self.coefficients, "ci": self.ci, "stars": self.stars,
            "r_squared": self.r_squared, "error": self.error,
            "error_ci": list(self.error_ci), "n": self.n, "B": self.B,
            "seed": self.seed, "rank": self.rank,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RegressionFit":
        beta = np.array([d["coefficients"][name] for name in d["features"]])
        return cls(model=d["model"], features=list(d["features"]),
                   coefficients=dict(d["coefficients"]),
                   ci={k: tuple(v) for k, v in d["ci"].items()},
                   stars=dict(d["stars"]), r_squared=float(d["r_squared"]),
                   error=float(d["error"]), error_ci=tuple(d["error_ci"]),
                   n=int(d["n"]), B=int(d["B"]), seed=int(d["seed"]),
                   rank=int(d["rank"]), _beta=beta)


def _lstsq(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.linalg.lstsq(X, y, rcond=None)[0]


def _bootstrap_replicates(X, y, B, rng, full_rank):
    """Coefficient and in-sample-RMSE replicates over row resamples."""
    n, k = X.shape
    idx = rng.integers(0, n, size=(B, n))
    betas = np.empty((B, k))
    rmses = np.empty(B)
    for start in range(0, B, _CHUNK):
        chunk = idx[start:start + _CHUNK]
        Xb = X[chunk]            # (b, n, k)
        yb = y[chunk]            # (b, n)
        solved = False
        if full_rank:
            XtX = np.einsum("bni,bnj->bij", Xb, Xb)
            Xty = np.einsum("bni,bn->bi", Xb, yb)
            try:
                beta_chunk = np.linalg.solve(XtX, Xty[:, :, None])[:, :, 0]
                solved = True
            except np.linalg.LinAlgError:
                solved = False  # a resample lost rank; fall back to SVD
        if not solved:
            beta_chunk = np.stack([_lstsq(Xb[i], yb[i]) for i in range(len(chunk))])
        resid = yb - np.einsum("bnk,bk->bn", Xb, beta_chunk)
        betas[start:start + len(chunk)] = beta_chunk
        rmses[start:start + len(chunk)] = np.sqrt((resid ** 2).mean(axis=1))
    return betas, rmses


def _stars(samples: np.ndarray) -> str:
    """Significance stars from percentile CIs excluding zero."""
    out = ""
    for level, mark in ((0.95, "*"), (0.99, "**"), (0.999, "***")):
        alpha = (1.0 - level) / 2.0
        lo, hi = np.quantile(samples, [alpha, 1.0 - alpha])
        if lo > 0 or hi < 0:
            out = mark
        else:
            break
    return out


def fit_ols(data: pd.DataFrame, model: str = "model1", B: int = DEFAULT_B,
            seed: int = 0) -> RegressionFit:
    """Least-squares fit of survey proportions with bootstrap CIs.

    Proportions are regressed with an identity link and never clipped during
    fitting. Coefficient CIs, significance stars, and the RMSE interval all
    come from the same B row resamples.
    """
    X, names = design_matrix(data, model)
    y = data["proportion"].to_numpy(float)
    n, k = X.shape
    if n < k:
        raise TooFewRowsError(f"{n} rows < {k} features; refusing to fit")
    beta = _lstsq(X, y)
    fitted = X @ beta
    resid = y - fitted
    ssr = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    r_squared = 0.0 if sst == 0 else 1.0 - ssr / sst
    rmse = float(np.sqrt(ssr / n))
    rank = int(np.linalg.matrix_rank(X))
    if rank < k:
        log.warning("design is rank-deficient (rank %d < %d features); "
                    "minimum-norm solution used", rank, k)
    rng = np.random.default_rng(derive_seed(seed, "ols", model))
    betas, rmses = _bootstrap_replicates(X, y, B, rng, full_rank=(rank == k))
    ci = {}
    stars = {}
    for j, name in enumerate(names):
        lo, hi = np.quantile(betas[:, j], [0.025, 0.975])
        ci[name] = (float(lo), float(hi))
        stars[name] = _stars(betas[:, j])
    err_lo, err_hi = np.quantile(rmses, [0.025, 0.975])
    return RegressionFit(
        model=model, features=names,
        coefficients={name: float(b) for name, b in zip(names, beta)},
        ci=ci, stars=stars, r_squared=r_squared, error=rmse,
        error_ci=(float(err_lo), float(err_hi)), n=n, B=B, seed=seed,
        rank=rank, _beta=beta)


def regression_report(fit: RegressionFit) -> pd.DataFrame:
    """Coefficient table shaped like a regression summary, CSV-ready."""
    rows = [{"feature": name,
             "coefficient": fit.coefficients[name],
             "ci_low": fit.ci[name][0], "ci_high": fit.ci[name][1],
             "stars": fit.stars[name]} for name in fit.features]
    rows.append({"feature": "R2", "coefficient": fit.r_squared,
                 "ci_low": float("nan"), "ci_high": float("nan"), "stars": ""})
    rows.append({"feature": "error (RMSE, this toolkit's definition)",
                 "coefficient": fit.error,
                 "ci_low": fit.error_ci[0], "ci_high": fit.error_ci[1], "stars": ""})
    return pd.DataFrame(rows, columns=["feature", "coefficient", "ci_low",
                                       "ci_high", "stars"])
