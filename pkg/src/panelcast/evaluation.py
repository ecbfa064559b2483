"""Forecast accuracy metrics and the cross-sectional Diebold-Mariano test.

The DM statistic averages per-unit squared-loss differentials over the
cross-section rather than over time, which is what makes it informative on
a two-year test window: d_i is the unit's mean over test years of
(e_A^2 - e_B^2), and DM = dbar / (sd(d)/sqrt(N)) with the (N-1) divisor.
DM > 0 means model A has the larger MSE. Under the null DM -> N(0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .panel import Panel, ScalingStats
from .errors import UnitMismatchError


def normal_cdf(x: float) -> float:
    """Standard normal CDF via erfc; absolute error well below 1e-10."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class ForecastSet:
    """Test-window predictions of one model, in standardized units."""

    model: str
    unit_ids: tuple[str, ...]
    test_years: tuple[int, ...]
    predictions: np.ndarray      # (N, T_te)
    stats_variable: str = "income"

    def __post_init__(self):
        object.__setattr__(self, "unit_ids", tuple(self.unit_ids))
        object.__setattr__(self, "test_years", tuple(int(y) for y in self.test_years))
        pred = np.asarray(self.predictions, dtype=np.float64)
        if pred.shape != (len(self.unit_ids), len(self.test_years)):
            raise ValueError(f"predictions shape {pred.shape} inconsistent with ids/years")
        if not np.all(np.isfinite(pred)):
            raise ValueError("non-finite predictions")
        object.__setattr__(self, "predictions", pred)


def forecast_errors(fs: ForecastSet, realized: Panel) -> np.ndarray:
    """Prediction minus realized value, standardized scale, (N, T_te)."""
    sub = realized.subset(fs.unit_ids) if realized.unit_ids != fs.unit_ids else realized
    cols = [sub.year_index(y) for y in fs.test_years]
    return fs.predictions - sub.values[:, cols]


@dataclass(frozen=True)
class DmResult:
    model_a: str
    model_b: str
    n: int
    d_bar: float
    sigma_d: float
    stat: float
    p_value: float
    zero_variance: bool = False


def dm_test(errors_a: np.ndarray, errors_b: np.ndarray,
            model_a: str = "A", model_b: str = "B") -> DmResult:
    """Cross-sectional DM test on aligned (N, T_te) error matrices."""
    ea = np.asarray(errors_a, dtype=np.float64)
    eb = np.asarray(errors_b, dtype=np.float64)
    if ea.shape != eb.shape or ea.ndim != 2:
        raise ValueError(f"error matrices must share an (N, T) shape, got {ea.shape} vs {eb.shape}")
    n = ea.shape[0]
    if n < 2:
        raise ValueError("need at least two units")
    d = (ea * ea - eb * eb).mean(axis=1)
    d_bar = float(d.mean())
    sigma_d = float(np.sqrt(((d - d_bar) ** 2).sum() / (n - 1)))
    if sigma_d == 0.0:
        if d_bar == 0.0:
            return DmResult(model_a, model_b, n, 0.0, 0.0, 0.0, 1.0, True)
        stat = math.inf if d_bar > 0 else -math.inf
        return DmResult(model_a, model_b, n, d_bar, 0.0, stat, 0.0, True)
    stat = d_bar / (sigma_d / math.sqrt(n))
    p = math.erfc(abs(stat) / math.sqrt(2.0))   # = 2 * (1 - Phi(|DM|))
    return DmResult(model_a, model_b, n, d_bar, sigma_d, float(stat), float(p))


def dm_from_forecasts(fa: ForecastSet, fb: ForecastSet,
                      realized: Panel) -> DmResult:
    """DM on the intersection of the two models' unit sets."""
    if fa.test_years != fb.test_years:
        raise UnitMismatchError("forecast sets cover different test years")
    common_b = set(fb.unit_ids)
    units = [u for u in fa.unit_ids if u in common_b]
    if len(units) < 2:
        raise UnitMismatchError("fewer than two units in common")
    fa_sub = _subset_forecasts(fa, units)
    fb_sub = _subset_forecasts(fb, units)
    return dm_test(forecast_errors(fa_sub, realized),
                   forecast_errors(fb_sub, realized), fa.model, fb.model)


def _subset_forecasts(fs: ForecastSet, units: list[str]) -> ForecastSet:
    if list(fs.unit_ids) == units:
        return fs
    pos = {u: i for i, u in enumerate(fs.unit_ids)}
    idx = np.array([pos[u] for u in units], dtype=np.intp)
    return ForecastSet(fs.model, tuple(units), fs.test_years,
                       fs.predictions[idx], fs.stats_variable)


@dataclass(frozen=True)
class AccuracyReport:
    """Per-model accuracy block (one row of the comparison table plus the
    error-distribution diagnostics)."""

    model: str
    n_units: int
    rmse_norm: float                 # cross-sectional mean of per-unit RMSE (std units)
    rmse_euro_median: float          # median per-unit RMSE on the original scale
    r2_pooled: float
    rmse_quantiles: tuple[float, float, float]   # P25, median, P75 (std units)
    top_share: float                 # MSE share of the top ceil(1% N) units
    top_count: int
    per_year_rmse: dict[int, float]  # pooled sqrt(mean_i e_{i,t}^2) per test year
    pred_range: tuple[float, float]
    per_unit_rmse: np.ndarray        # (N,) standardized per-unit RMSE
    per_unit_rmse_euro: np.ndarray   # (N,)

    def __post_init__(self):
        q25, q50, q75 = self.rmse_quantiles
        if not (q25 <= q50 <= q75):
            raise ValueError("quantiles must be monotone")
        if not (0.0 < self.top_share <= 1.0):
            raise ValueError("top share must lie in (0, 1]")
        if self.r2_pooled > 1.0:
            raise ValueError("pooled R^2 cannot exceed 1")


def accuracy(fs: ForecastSet, realized: Panel, stats: ScalingStats) -> AccuracyReport:
    """Table-row metrics for one forecast set.

    `realized` is the standardized target panel covering the test years;
    the euro-scale column destandardizes predictions and realizations with
    `stats` before differencing. Pooled R^2 centers the total sum of
    squares on the pooled test-sample mean of the standardized target, so
    predicting that mean scores exactly zero.
    """
    missing = set(fs.unit_ids) - set(realized.unit_ids)
    if missing:
        raise UnitMismatchError(f"forecast units absent from panel: {sorted(missing)[:5]}")
    sub = realized.subset(fs.unit_ids) if realized.unit_ids != fs.unit_ids else realized
    st = stats.subset(fs.unit_ids) if stats.unit_ids != fs.unit_ids else stats
    cols = [sub.year_index(y) for y in fs.test_years]
    actual = sub.values[:, cols]
    err = fs.predictions - actual
    n = len(fs.unit_ids)

    per_unit_rmse = np.sqrt((err * err).mean(axis=1))
    pred_e = fs.predictions * st.sd[:, None] + st.mean[:, None]
    act_e = actual * st.sd[:, None] + st.mean[:, None]
    err_e = pred_e - act_e
    per_unit_rmse_euro = np.sqrt((err_e * err_e).mean(axis=1))

    sse = float((err * err).sum())
    pooled_mean = actual.mean()
    sst = float(((actual - pooled_mean) ** 2).sum())
    r2 = 1.0 - sse / sst if sst > 0 else (1.0 if sse == 0 else -math.inf)

    totals = (err * err).sum(axis=1)
    m = math.ceil(0.01 * n)
    order = sorted(range(n), key=lambda i: (-totals[i], fs.unit_ids[i]))
    grand = float(totals.sum())
    top_share = float(totals[order[:m]].sum() / grand) if grand > 0 else m / n

    per_year = {
        int(y): float(np.sqrt((err[:, j] ** 2).mean()))
        for j, y in enumerate(fs.test_years)
    }
    q25, q50, q75 = (float(np.percentile(per_unit_rmse, q)) for q in (25, 50, 75))
    return AccuracyReport(
        model=fs.model,
        n_units=n,
        rmse_norm=float(per_unit_rmse.mean()),
        rmse_euro_median=float(np.median(per_unit_rmse_euro)),
        r2_pooled=float(r2),
        rmse_quantiles=(q25, q50, q75),
        top_share=top_share,
        top_count=m,
        per_year_rmse=per_year,
        pred_range=(float(fs.predictions.min()), float(fs.predictions.max())),
        per_unit_rmse=per_unit_rmse,
        per_unit_rmse_euro=per_unit_rmse_euro,
    )


@dataclass(frozen=True)
class DominanceRecord:
    """Quantile comparison: does A's P75 sit below B's P25?"""

    model_a: str
    model_b: str
    a_quantiles: tuple[float, float, float]
    b_quantiles: tuple[float, float, float]
    dominates: bool


def dominance_summary(a: AccuracyReport, b: AccuracyReport) -> DominanceRecord:
    return DominanceRecord(
        model_a=a.model,
        model_b=b.model,
        a_quantiles=a.rmse_quantiles,
        b_quantiles=b.rmse_quantiles,
        dominates=bool(a.rmse_quantiles[2] < b.rmse_quantiles[0]),
    )


# --- forecast-set CSV round trip -----------------------------------------------

def write_forecasts_csv(fs: ForecastSet, path: str) -> None:
    from ._util import atomic_write, fmt

    with atomic_write(path) as fh:
        fh.write("unit_id,year,prediction\n")
        for i, u in enumerate(fs.unit_ids):
            for j, y in enumerate(fs.test_years):
                fh.write(f"{u},{y},{fmt(fs.predictions[i, j])}\n")


def read_forecasts_csv(path: str, model: str,
                       stats_variable: str = "income") -> ForecastSet:
    import csv

    cells: dict[str, dict[int, float]] = {}
    order: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            u = row["unit_id"]
            if u not in cells:
                cells[u] = {}
                order.append(u)
            cells[u][int(row["year"])] = float(row["prediction"])
    years = sorted({y for d in cells.values() for y in d})
    preds = np.array([[cells[u][y] for y in years] for u in order])
    return ForecastSet(model, tuple(order), tuple(years), preds, stats_variable)
