"""Two-feature additive model fitted by backfitting.

y ≈ α + f1(base_prob) + f2(score), each f a natural cubic smoothing spline
with its roughness penalty chosen by generalized cross-validation. Smooths
are centered to mean zero over the training inputs, with the grand mean
absorbed into the intercept.

The smoother solves min Σ w_i (y_i − f(x_i))² + λ ∫ f''² with the classic
tridiagonal penalty K = Q R⁻¹ Qᵀ over the knots. A one-time eigendecomposition
of the (weight-scaled) penalty turns every subsequent fit and the whole GCV
grid search into O(knots) work, so backfitting re-selects λ cheaply. λ is
re-selected during the first few sweeps and then frozen, making the remaining
sweeps plain coordinate descent on a fixed objective, which converges.
Duplicated abscissas are collapsed to weighted means (same minimizer); unique
grids longer than MAX_KNOTS are quantile-binned, the usual reduced-basis
treatment for penalized splines.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline

from ..errors import MediaDietError, TooFewRowsError
from .seeds import derive_seed

log = logging.getLogger(__name__)

DEFAULT_B = 2000
MIN_ROWS = 50
TOL = 1e-6
MAX_ITER = 50

# Quantile-knot cap per smooth. Keeping the basis well below n makes the
# two smoothers far from identity maps, so the backfit alternation contracts;
# 40 knots is ample flexibility for a univariate effect.
MAX_KNOTS = 40
GCV_GRID_POINTS = 141
# Backfit sweeps that re-select lambda by GCV before freezing it.
GCV_SWEEPS = 5


def penalty_matrix(knots: np.ndarray) -> np.ndarray:
    """Natural-cubic-spline roughness penalty K with fᵀKf = ∫ f''²."""
    m = len(knots)
    h = np.diff(knots)
    Q = np.zeros((m, m - 2))
    R = np.zeros((m - 2, m - 2))
    for j in range(m - 2):
        Q[j, j] = 1.0 / h[j]
        Q[j + 1, j] = -(1.0 / h[j] + 1.0 / h[j + 1])
        Q[j + 2, j] = 1.0 / h[j + 1]
        R[j, j] = (h[j] + h[j + 1]) / 3.0
        if j + 1 < m - 2:
            R[j, j + 1] = h[j + 1] / 6.0
            R[j + 1, j] = h[j + 1] / 6.0
    return Q @ np.linalg.solve(R, Q.T)


class _ZeroSmooth:
    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


class _LineSmooth:
    def __init__(self, slope, intercept):
        self.slope = slope
        self.intercept = intercept

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept


class SplineSmoother:
    """Reusable smoother for one feature column.

    Construction does the O(m³) eigendecomposition; each ``fit`` call is then
    linear in the number of knots, including the GCV grid search.
    """

    def __init__(self, x: np.ndarray, max_knots: int = MAX_KNOTS):
        x = np.asarray(x, dtype=float)
        self.x = x
        self.n = len(x)
        xu, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
        if len(xu) > max_knots:
            edges = np.quantile(x, np.linspace(0.0, 1.0, max_knots + 1)[1:-1])
            bin_of_unique = np.searchsorted(edges, xu, side="right")
            _, bin_ids = np.unique(bin_of_unique, return_inverse=True)
            inverse = bin_ids[inverse]
            counts = np.bincount(inverse).astype(float)
            xu = np.bincount(inverse, weights=x) / counts
        self.knots = np.asarray(xu, dtype=float)
        self.inverse = inverse
        self.counts = np.asarray(counts, dtype=float)
        self.m = len(self.knots)
        if self.m >= 3:
            K = penalty_matrix(self.knots)
            sw = np.sqrt(self.counts)
            C = K / np.outer(sw, sw)
            d, U = np.linalg.eigh(C)
            # K has rank exactly m-2 (lines are unpenalized); pin the null
            # space to 0 so no lambda can shrink the linear component.
            d = np.clip(d, 0.0, None)
            d[:2] = 0.0
            self.d = d
            self.U = U
            self.sqrt_w = sw
            pos = self.d[self.d > 0]
            scale = 1.0 / np.median(pos)
            self._lam_grid = np.geomspace(scale * 1e-7, scale * 1e7, GCV_GRID_POINTS)

    def _collapse(self, target: np.ndarray) -> np.ndarray:
        return np.bincount(self.inverse, weights=target) / self.counts

    def _gcv_lambda(self, z: np.ndarray) -> float:
        shrink = 1.0 / (1.0 + np.outer(self._lam_grid, self.d))  # (L, m)
        rss = (((1.0 - shrink) * z) ** 2).sum(axis=1)
        trace = shrink.sum(axis=1)
        denom = self.n - trace
        gcv = np.full(len(self._lam_grid), np.inf)
        ok = denom > 1e-8
        gcv[ok] = self.n * rss[ok] / denom[ok] ** 2
        return float(self._lam_grid[int(np.argmin(gcv))])

    def fit(self, target: np.ndarray, lam: float | None = None):
        """Returns (callable, fitted values at the data rows, lambda used)."""
        tu = self._collapse(target)
        if self.m == 1:
            return _ZeroSmooth(), np.zeros(self.n), 0.0
        if self.m == 2:
            slope, intercept = np.polyfit(self.knots, tu, 1, w=np.sqrt(self.counts))
            fn = _LineSmooth(slope, intercept)
            return fn, fn(self.x), 0.0
        z = self.U.T @ (self.sqrt_w * tu)
        if lam is None:
            lam = self._gcv_lambda(z)
        f_knots = (self.U @ (z / (1.0 + lam * self.d))) / self.sqrt_w
        fn = CubicSpline(self.knots, f_knots, bc_type="natural")
        # Rows are fitted at their true abscissas, not their bin centers.
        return fn, np.asarray(fn(self.x), dtype=float), lam


@dataclass
class FittedSmooth:
    """A univariate smooth, centered over its training inputs."""

    feature: str
    offset: float
    lam: float
    _fn: object = field(repr=False, default=None)

    def __call__(self, x):
        return np.asarray(self._fn(np.asarray(x, dtype=float)), dtype=float) - self.offset


@dataclass
class GamFit:
    smooths: tuple
    intercept: float
    error: float
    error_ci: tuple
    backfit_iters: int
    converged: bool
    n: int
    B: int
    seed: int

    def predict(self, data: pd.DataFrame) -> np.ndarray:
        out = np.full(len(data), self.intercept)
        for smooth in self.smooths:
            out = out + smooth(data[smooth.feature].to_numpy(float))
        return out


def fit_gam(data: pd.DataFrame, tol: float = TOL, max_iter: int = MAX_ITER,
            B: int = DEFAULT_B, seed: int = 0) -> GamFit:
    """Backfit the two-smooth additive model.

    Iterates partial-residual smoothing until the largest change in fitted
    smooth values drops below ``tol`` or ``max_iter`` passes; non-convergence
    is flagged on the result, not raised. The in-sample RMSE interval comes
    from a percentile bootstrap over the squared residuals of the final fit.
    """
    for col in ("base_prob", "score", "proportion"):
        if col not in data.columns:
            raise MediaDietError(f"analysis dataset has no {col!r} column")
    n = len(data)
    if n < MIN_ROWS:
        raise TooFewRowsError(f"GAM needs at least {MIN_ROWS} rows, got {n}")
    x1 = data["base_prob"].to_numpy(float)
    x2 = data["score"].to_numpy(float)
    y = data["proportion"].to_numpy(float)
    if not all(np.all(np.isfinite(v)) for v in (x1, x2, y)):
        raise MediaDietError("GAM inputs must be finite")

    smoother1 = SplineSmoother(x1)
    smoother2 = SplineSmoother(x2)
    alpha = float(y.mean())
    f1 = np.zeros(n)
    f2 = np.zeros(n)
    fn1 = fn2 = _ZeroSmooth()
    off1 = off2 = 0.0
    lam1 = lam2 = None
    converged = False
    iters = 0
    for iters in range(1, max_iter + 1):
        reselect = iters <= GCV_SWEEPS
        fn1, raw1, used1 = smoother1.fit(y - alpha - f2, lam=None if reselect else lam1)
        lam1 = used1
        off1 = float(raw1.mean())
        new_f1 = raw1 - off1

        fn2, raw2, used2 = smoother2.fit(y - alpha - new_f1,
                                         lam=None if reselect else lam2)
        lam2 = used2
        off2 = float(raw2.mean())
        new_f2 = raw2 - off2

        delta = max(np.max(np.abs(new_f1 - f1)), np.max(np.abs(new_f2 - f2)))
        f1, f2 = new_f1, new_f2
        if delta < tol:
            converged = True
            break
    if not converged:
        log.warning("backfitting did not converge in %d iterations", max_iter)

    resid = y - (alpha + f1 + f2)
    rmse = float(np.sqrt((resid ** 2).mean()))
    rng = np.random.default_rng(derive_seed(seed, "gam"))
    sq = resid ** 2
    idx = rng.integers(0, n, size=(B, n))
    rmse_b = np.sqrt(sq[idx].mean(axis=1))
    lo, hi = np.quantile(rmse_b, [0.025, 0.975])
    return GamFit(
        smooths=(FittedSmooth("base_prob", off1, lam1, fn1),
                 FittedSmooth("score", off2, lam2, fn2)),
        intercept=alpha, error=rmse, error_ci=(float(lo), float(hi)),
        backfit_iters=iters, converged=converged, n=n, B=B, seed=seed)
