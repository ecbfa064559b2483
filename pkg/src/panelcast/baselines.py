"""Non-spatial statistical benchmarks: persistence, pooled panel FE,
per-unit OLS, and per-unit ARDL.

All estimators operate on standardized panels. Per-unit regressions degrade
gracefully on degenerate series: the affected units fall back to a simpler
nested specification and are flagged, never dropped, so a large panel fit
cannot abort on a handful of constant series.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularRegressorError, UnitMismatchError
from .panel import Panel, SplitSpec
from .spatial import within_transform

MODELS = ("persistence", "panelfe", "olsper", "ardl")

# rank threshold for the tiny per-unit design matrices
_SV_RTOL = 1e-10


@dataclass(frozen=True)
class LinearFit:
    """Coefficients of one linear benchmark.

    PanelFE carries the single pooled slope in `beta`; the per-unit models
    carry length-N vectors; persistence carries no parameters at all.
    `flags` maps unit id -> fallback tag for degenerate regressions.
    """

    model: str
    unit_ids: tuple[str, ...]
    beta: float | None = None
    alpha: np.ndarray | None = None
    beta_i: np.ndarray | None = None
    phi_i: np.ndarray | None = None
    flags: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown benchmark {self.model!r}")
        n = len(self.unit_ids)
        for name in ("alpha", "beta_i", "phi_i"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=np.float64)
                if v.shape != (n,):
                    raise ValueError(f"{name} must have length {n}")
                object.__setattr__(self, name, v)
        if self.model == "panelfe" and self.beta is None:
            raise ValueError("panelfe requires the pooled slope")
        if self.model == "persistence" and any(
            x is not None for x in (self.beta, self.alpha, self.beta_i, self.phi_i)
        ):
            raise ValueError("persistence carries no parameters")


def _check_aligned(y: Panel, x: Panel) -> None:
    if y.unit_ids != x.unit_ids or y.years != x.years:
        raise UnitMismatchError("panels must share unit ids and years")


def persistence_forecast(y: Panel, split: SplitSpec,
                         recursive_lags: bool = False) -> np.ndarray:
    """yhat_{i,t} = y_{i,t-1} for each test year.

    With recursive_lags the forecast conditions on its own prior prediction,
    which for pure persistence pins every test year to the last train-window
    value; the default conditions on the realized prior year.
    """
    test = split.test_cols(y)
    if recursive_lags:
        last = y.values[:, test[0] - 1]
        return np.repeat(last[:, None], len(test), axis=1)
    return y.values[:, test - 1].copy()


def fit_panel_fe(y: Panel, x: Panel, split: SplitSpec) -> LinearFit:
    """Pooled within-estimator: one slope, unit-specific intercepts."""
    _check_aligned(y, x)
    cols = split.train_cols(y)
    yw, ybar = within_transform(y.values[:, cols])
    xw, xbar = within_transform(x.values[:, cols])
    sxx = float((xw * xw).sum())
    if sxx == 0.0:
        raise SingularRegressorError("regressor has zero within variance")
    beta = float((xw * yw).sum() / sxx)
    alpha = ybar - beta * xbar
    return LinearFit("panelfe", y.unit_ids, beta=beta, alpha=alpha)


def fit_ols_per_unit(y: Panel, x: Panel, split: SplitSpec) -> LinearFit:
    """Simple per-unit OLS of y on (1, x) over the train window."""
    _check_aligned(y, x)
    cols = split.train_cols(y)
    y_tr = y.values[:, cols]
    x_tr = x.values[:, cols]
    xbar = x_tr.mean(axis=1)
    ybar = y_tr.mean(axis=1)
    xc = x_tr - xbar[:, None]
    sxx = (xc * xc).sum(axis=1)
    sxy = (xc * (y_tr - ybar[:, None])).sum(axis=1)
    flags: dict[str, str] = {}
    beta_i = np.zeros(y.n)
    ok = sxx > 0
    beta_i[ok] = sxy[ok] / sxx[ok]
    for i in np.flatnonzero(~ok):
        flags[y.unit_ids[i]] = "degenerate_regressor"
    alpha = ybar - beta_i * xbar
    return LinearFit("olsper", y.unit_ids, alpha=alpha, beta_i=beta_i, flags=flags)


def _ols_small(design: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, int]:
    """Least squares with an explicit effective rank under a relative
    singular-value cutoff."""
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=_SV_RTOL)
    return coef, int(rank)


def fit_ardl(y: Panel, x: Panel, split: SplitSpec) -> LinearFit:
    """Per-unit OLS of y_t on (1, y_{t-1}, x_t) over train years t >= 2nd.

    Collinear units fall back to intercept + lag; if the lag is itself
    degenerate they fall back to intercept only. Fallback coefficients are
    stored with zeros in the dropped positions and the unit is flagged.
    """
    _check_aligned(y, x)
    cols = split.train_cols(y)
    y_tr = y.values[:, cols]
    x_tr = x.values[:, cols]
    n = y.n
    alpha = np.zeros(n)
    beta_i = np.zeros(n)
    phi_i = np.zeros(n)
    flags: dict[str, str] = {}
    target = y_tr[:, 1:]
    lag = y_tr[:, :-1]
    contemp = x_tr[:, 1:]
    ones = np.ones(target.shape[1])
    for i in range(n):
        design = np.column_stack([ones, lag[i], contemp[i]])
        coef, rank = _ols_small(design, target[i])
        if rank == 3:
            alpha[i], phi_i[i], beta_i[i] = coef
            continue
        design2 = np.column_stack([ones, lag[i]])
        coef2, rank2 = _ols_small(design2, target[i])
        if rank2 == 2:
            alpha[i], phi_i[i] = coef2
            flags[y.unit_ids[i]] = "collinear_fallback_lag"
        else:
            alpha[i] = target[i].mean()
            flags[y.unit_ids[i]] = "collinear_fallback_intercept"
    return LinearFit("ardl", y.unit_ids, alpha=alpha, beta_i=beta_i,
                     phi_i=phi_i, flags=flags)


def forecast_linear(fit: LinearFit, y: Panel, x: Panel, split: SplitSpec,
                    recursive_lags: bool = False) -> np.ndarray:
    """Test-window predictions of any linear benchmark, shape (N, T_te).

    Lag-dependent models condition on realized income for the prior year by
    default; `recursive_lags` switches to the model's own previous forecast.
    """
    _check_aligned(y, x)
    if fit.unit_ids != y.unit_ids:
        raise UnitMismatchError("fit units do not match panel units")
    test = split.test_cols(y)
    if fit.model == "persistence":
        return persistence_forecast(y, split, recursive_lags)
    x_te = x.values[:, test]
    if fit.model == "panelfe":
        return fit.alpha[:, None] + fit.beta * x_te
    if fit.model == "olsper":
        return fit.alpha[:, None] + fit.beta_i[:, None] * x_te
    # ardl
    preds = np.empty((y.n, len(test)))
    prev = y.values[:, test[0] - 1]
    for j, col in enumerate(test):
        preds[:, j] = fit.alpha + fit.phi_i * prev + fit.beta_i * x.values[:, col]
        prev = preds[:, j] if recursive_lags else y.values[:, col]
    return preds


def write_coefficients_csv(fit: LinearFit, path: str) -> None:
    """Per-unit coefficient dump: unit_id, alpha, beta, phi, flags."""
    from ._util import atomic_write, fmt

    n = len(fit.unit_ids)
    alpha = fit.alpha if fit.alpha is not None else np.zeros(n)
    if fit.model == "panelfe":
        beta = np.full(n, fit.beta)
    elif fit.beta_i is not None:
        beta = fit.beta_i
    else:
        beta = np.zeros(n)
    phi = fit.phi_i if fit.phi_i is not None else np.zeros(n)
    with atomic_write(path) as fh:
        fh.write("unit_id,alpha,beta,phi,flags\n")
        for i, u in enumerate(fit.unit_ids):
            fh.write(f"{u},{fmt(alpha[i])},{fmt(beta[i])},{fmt(phi[i])},"
                     f"{fit.flags.get(u, '')}\n")
