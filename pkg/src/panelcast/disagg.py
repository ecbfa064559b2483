"""Chow-Lin disaggregation of annual series to monthly frequency, and the
persistence diagnostic that exposes its near-unit-root artefact.

The monthly model is intercept-only (no exogenous indicator): y_m = mu + u
with u a stationary AR(1). Writing C for the T x 12T aggregation matrix
(each year's twelve months sum to the annual value), the monthly estimate is

    yhat_m = mu_hat + V C' (C V C')^-1 (y - C mu_hat)

with mu_hat the GLS estimate from the aggregated model and V the AR(1)
covariance. The innovation coefficient is chosen by maximizing the
aggregated-model Gaussian likelihood (concentrated over mu and sigma^2) on
a grid over (0, 1) with golden-section refinement. The aggregation
constraint C yhat_m = y holds by construction up to solver precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalFailureError
from .panel import Panel

MONTHS = 12
A_GRID = np.round(np.arange(0.01, 1.00, 0.01), 2)   # 0.01 .. 0.99
A_TOL = 1e-6
COND_LIMIT = 1e12


@dataclass(frozen=True)
class DisaggResult:
    monthly: np.ndarray                 # (12*T,)
    a: float                            # AR(1) innovation coefficient
    aggregation_residuals: np.ndarray   # (T,) C yhat - y

    def __post_init__(self):
        if not (0.0 < self.a < 1.0):
            raise ValueError("a must lie strictly inside (0, 1)")


def _ar1_cov(a: float, m: int) -> np.ndarray:
    """Stationary AR(1) covariance a^{|i-j|} / (1 - a^2)."""
    idx = np.arange(m)
    return a ** np.abs(idx[:, None] - idx[None, :]) / (1.0 - a * a)


def _aggregate_cov(v: np.ndarray, t: int) -> np.ndarray:
    """C V C' computed by year-block summation."""
    return v.reshape(t, MONTHS, t, MONTHS).sum(axis=(1, 3))


class _Workspace:
    """Per-(T, a) pieces shared by the likelihood and the distribution step."""

    def __init__(self, annual: np.ndarray, a: float):
        t = annual.size
        self.t = t
        self.a = a
        self.v = _ar1_cov(a, MONTHS * t)
        va = _aggregate_cov(self.v, t)
        cond = np.linalg.cond(va)
        if not cond < COND_LIMIT:
            raise NumericalFailureError(
                f"aggregated covariance condition number {cond:.3e} exceeds {COND_LIMIT:.0e} (a={a})"
            )
        self.chol = scipy.linalg.cho_factor(va)
        self.logdet_va = 2.0 * float(np.log(np.diag(self.chol[0])).sum())
        x_low = np.full(t, float(MONTHS))        # aggregated intercept column
        vi_y = scipy.linalg.cho_solve(self.chol, annual)
        vi_x = scipy.linalg.cho_solve(self.chol, x_low)
        self.mu = float((x_low @ vi_y) / (x_low @ vi_x))
        self.resid_low = annual - x_low * self.mu

    def loglik(self) -> float:
        vi_r = scipy.linalg.cho_solve(self.chol, self.resid_low)
        sigma2 = float(self.resid_low @ vi_r) / self.t
        if sigma2 <= 0:
            return -math.inf
        return -0.5 * self.t * math.log(sigma2) - 0.5 * self.logdet_va

    def distribute(self) -> np.ndarray:
        vi_r = scipy.linalg.cho_solve(self.chol, self.resid_low)
        # V C' w  ==  sum of V columns within each year block, weighted
        vct = self.v.reshape(MONTHS * self.t, self.t, MONTHS).sum(axis=2)
        return self.mu + vct @ vi_r


def chow_lin_at(annual: np.ndarray, a: float) -> np.ndarray:
    """Monthly distribution for a fixed AR(1) coefficient (diagnostic hook)."""
    annual = _validate_annual(annual)
    return _Workspace(annual, a).distribute()


def _validate_annual(annual: np.ndarray) -> np.ndarray:
    annual = np.asarray(annual, dtype=np.float64).ravel()
    if annual.size < 3:
        raise ValueError("need at least 3 annual observations")
    if not np.all(np.isfinite(annual)):
        raise ValueError("annual series contains non-finite values")
    return annual


def chow_lin(annual: np.ndarray) -> DisaggResult:
    """Disaggregate one annual series to 12*T monthly values."""
    annual = _validate_annual(annual)

    def ll(a: float) -> float:
        return _Workspace(annual, a).loglik()

    values = np.array([ll(a) for a in A_GRID])
    k = int(np.argmax(values))
    lo = A_GRID[max(k - 1, 0)]
    hi = A_GRID[min(k + 1, len(A_GRID) - 1)]
    best_a, best_ll = float(A_GRID[k]), float(values[k])
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = ll(c), ll(d)
    while (hi - lo) > A_TOL:
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = ll(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = ll(d)
        for point, val in ((c, fc), (d, fd)):
            if val > best_ll:
                best_a, best_ll = float(point), float(val)

    ws = _Workspace(annual, best_a)
    monthly = ws.distribute()
    resid = monthly.reshape(ws.t, MONTHS).sum(axis=1) - annual
    return DisaggResult(monthly=monthly, a=best_a, aggregation_residuals=resid)


# --- panel-level wrappers -------------------------------------------------------

@dataclass(frozen=True)
class MonthlyPanel:
    unit_ids: tuple[str, ...]
    years: tuple[int, ...]
    values: np.ndarray          # (N, 12*T)
    a: np.ndarray               # (N,) fitted AR(1) coefficient per unit


def disaggregate_panel(panel: Panel) -> MonthlyPanel:
    n = panel.n
    values = np.empty((n, MONTHS * panel.t))
    a = np.empty(n)
    for i in range(n):
        res = chow_lin(panel.values[i])
        values[i] = res.monthly
        a[i] = res.a
    return MonthlyPanel(panel.unit_ids, panel.years, values, a)


@dataclass(frozen=True)
class PersistenceDiagnostic:
    unit_ids: tuple[str, ...]
    phi_monthly: np.ndarray     # (N,) per-unit AR(1) coefficient
    median: float
    iqr: tuple[float, float]
    implied_annual: float       # (median phi_m)^12


def persistence_diagnostic(monthly: MonthlyPanel) -> PersistenceDiagnostic:
    """Per-unit OLS of y_t on (1, y_{t-1}) over the monthly series."""
    y = monthly.values
    lag = y[:, :-1]
    cur = y[:, 1:]
    lm = lag.mean(axis=1, keepdims=True)
    cm = cur.mean(axis=1, keepdims=True)
    sxx = ((lag - lm) ** 2).sum(axis=1)
    sxy = ((lag - lm) * (cur - cm)).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(sxx > 0, sxy / np.where(sxx > 0, sxx, 1.0), np.nan)
    ok = phi[np.isfinite(phi)]
    if ok.size == 0:
        raise NumericalFailureError("no unit has a non-degenerate monthly series")
    med = float(np.median(ok))
    return PersistenceDiagnostic(
        unit_ids=monthly.unit_ids,
        phi_monthly=phi,
        median=med,
        iqr=(float(np.percentile(ok, 25)), float(np.percentile(ok, 75))),
        implied_annual=med ** MONTHS,
    )


def write_monthly_csv(monthly: MonthlyPanel, path: str) -> None:
    from ._util import atomic_write, fmt

    with atomic_write(path) as fh:
        fh.write("unit_id,year,month,value\n")
        for i, u in enumerate(monthly.unit_ids):
            for j, year in enumerate(monthly.years):
                for m in range(MONTHS):
                    v = monthly.values[i, j * MONTHS + m]
                    fh.write(f"{u},{year},{m + 1},{fmt(v)}\n")
