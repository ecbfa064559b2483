"""SAR-FE and SDM-FE quasi-maximum likelihood with an O(N) log-determinant.

Both models concentrate the slope coefficients and the residual variance
out of the Gaussian likelihood, leaving a one-dimensional function of the
spatial coefficient rho:

    ll(rho) = -(N*T/2) * log(sigma2(rho)) + T * sum_j log(1 - rho*lambda_j)

where sigma2(rho) is the pooled least-squares residual variance of
(y~ - rho*W y~) on the within-transformed regressor block, and lambda_j is
the cached spectrum of the similarity matrix. The sum over eigenvalues is
the only part that depends on the graph, so each evaluation is O(N) and
the profile can be optimized by grid search plus golden-section refinement.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    RhoOutOfBoundsError,
    SingularRegressorError,
    SolveFailureError,
    UnitMismatchError,
)
from .graph import SpatialGraph, admissible_interval, spatial_lag
from .panel import Panel, SplitSpec

GRID_POINTS = 201
GRID_COVERAGE = 0.999
RHO_TOL = 1e-7
SOLVE_RESIDUAL_TOL = 1e-8
MODELS = ("sar", "sdm")


class NonConcaveWarning(UserWarning):
    """Profile likelihood showed multiple local maxima on the coarse grid."""


@dataclass(frozen=True)
class SpatialFit:
    """QML estimate of a spatial panel model with unit fixed effects."""

    model: str
    rho: float
    beta: float
    theta: float | None
    sigma2: float
    alpha: np.ndarray            # (N,) fixed effects, train-window units
    unit_ids: tuple[str, ...]
    loglik_trace: np.ndarray     # (k, 2): rho, concentrated log-likelihood
    rho_interval: tuple[float, float]
    n_train_years: int
    fit_warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        lo, hi = self.rho_interval
        if not (lo < self.rho < hi):
            raise RhoOutOfBoundsError(f"rho={self.rho!r} not inside ({lo!r}, {hi!r})")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if (self.theta is not None) != (self.model == "sdm"):
            raise ValueError("theta present iff model is sdm")
        trace = np.asarray(self.loglik_trace, dtype=np.float64)
        object.__setattr__(self, "loglik_trace", trace)
        best = trace[np.argmax(trace[:, 1]), 0]
        if best != self.rho:
            raise ValueError("loglik trace maximum not attained at returned rho")
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=np.float64))


def within_transform(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Demean each row; returns (demeaned, per-row means)."""
    values = np.asarray(values, dtype=np.float64)
    means = values.mean(axis=1)
    return values - means[:, None], means


class _Profile:
    """Precomputed pieces of the concentrated likelihood.

    The pooled OLS coefficient of (a - rho*b) on X is linear in rho, so the
    residual sum of squares is an exact quadratic in rho; three scalars make
    every profile evaluation O(N) (the eigenvalue sum) plus O(1).
    """

    def __init__(self, y_within: np.ndarray, x_within: np.ndarray,
                 graph: SpatialGraph, model: str):
        if model not in MODELS:
            raise ValueError(f"unknown model {model!r}")
        n, t = y_within.shape
        if x_within.shape != (n, t):
            raise ValueError("y and x must have matching shape")
        if n != graph.n:
            raise UnitMismatchError(f"panel has {n} units, graph has {graph.n}")
        self.n, self.t = n, t
        self.model = model
        self.lam = graph.eigenvalues
        self.interval = admissible_interval(graph)

        wy = spatial_lag(graph, y_within)
        cols = [x_within.ravel()]
        if model == "sdm":
            cols.append(spatial_lag(graph, x_within).ravel())
        x = np.column_stack(cols)
        sv = np.linalg.svd(x, compute_uv=False)
        if sv[0] == 0 or sv[-1] <= sv[0] * 1e-12:
            raise SingularRegressorError(
                f"rank-deficient regressor block for model {model} "
                f"(singular values {sv})"
            )
        a = y_within.ravel()
        b = wy.ravel()
        xtx = x.T @ x
        c0 = np.linalg.solve(xtx, x.T @ a)
        c1 = np.linalg.solve(xtx, x.T @ b)
        e0 = a - x @ c0
        e1 = b - x @ c1
        self._c0, self._c1 = c0, c1
        self._q = (e0 @ e0, e0 @ e1, e1 @ e1)

    def ssr(self, rho: float) -> float:
        q00, q01, q11 = self._q
        return q00 - 2.0 * rho * q01 + rho * rho * q11

    def coef(self, rho: float) -> np.ndarray:
        return self._c0 - rho * self._c1

    def loglik(self, rho: float) -> float:
        lo, hi = self.interval
        if not (lo < rho < hi):
            raise RhoOutOfBoundsError(f"rho={rho!r} outside open interval ({lo!r}, {hi!r})")
        nt = self.n * self.t
        sigma2 = self.ssr(rho) / nt
        return float(-0.5 * nt * np.log(sigma2) + self.t * np.log1p(-rho * self.lam).sum())


def concentrated_loglik(rho: float, y_within: np.ndarray, x_within: np.ndarray,
                        graph: SpatialGraph, model: str = "sar") -> float:
    """Profile log-likelihood at a single rho (constant terms dropped).

    Inputs must already be within-transformed over the train window.
    """
    return _Profile(y_within, x_within, graph, model).loglik(rho)


def _golden_section(f, a: float, b: float, tol: float):
    """Maximize f on [a, b]; returns list of (x, f(x)) evaluations."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    out = [(c, fc), (d, fd)]
    while (b - a) > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
            out.append((c, fc))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
            out.append((d, fd))
    return out


def _count_local_maxima(ll: np.ndarray) -> int:
    interior = (ll[1:-1] > ll[:-2]) & (ll[1:-1] > ll[2:])
    count = int(interior.sum())
    if ll[0] > ll[1]:
        count += 1
    if ll[-1] > ll[-2]:
        count += 1
    return count


def fit(y: Panel, x: Panel, graph: SpatialGraph, split: SplitSpec,
        model: str = "sar") -> SpatialFit:
    """Estimate (rho, beta[, theta], sigma2, alpha_i) by profile QML.

    Coarse grid over 99.9% of the admissible interval, then golden-section
    refinement of the bracket around the grid maximum. Fixed effects are
    recovered from the spatially filtered train-window residuals.
    """
    if y.unit_ids != graph.unit_ids or x.unit_ids != graph.unit_ids:
        raise UnitMismatchError("panels must be aligned with the graph units")
    cols = split.train_cols(y)
    y_tr = y.values[:, cols]
    x_tr = x.values[:, cols]
    yw, _ = within_transform(y_tr)
    xw, _ = within_transform(x_tr)
    prof = _Profile(yw, xw, graph, model)

    lo, hi = prof.interval
    margin = 0.5 * (1.0 - GRID_COVERAGE) * (hi - lo)
    grid = np.linspace(lo + margin, hi - margin, GRID_POINTS)
    ll = np.array([prof.loglik(r) for r in grid])
    trace = [(float(r), float(v)) for r, v in zip(grid, ll)]

    fit_warnings: list[str] = []
    n_max = _count_local_maxima(ll)
    if n_max > 1:
        msg = f"profile likelihood shows {n_max} local maxima on the coarse grid"
        warnings.warn(msg, NonConcaveWarning)
        fit_warnings.append(msg)

    k = int(np.argmax(ll))
    bracket_lo = grid[max(k - 1, 0)]
    bracket_hi = grid[min(k + 1, GRID_POINTS - 1)]
    trace.extend((float(r), float(v)) for r, v in
                 _golden_section(prof.loglik, bracket_lo, bracket_hi, RHO_TOL))

    trace_arr = np.asarray(trace, dtype=np.float64)
    best = int(np.argmax(trace_arr[:, 1]))
    rho_hat = float(trace_arr[best, 0])

    coef = prof.coef(rho_hat)
    beta = float(coef[0])
    theta = float(coef[1]) if model == "sdm" else None
    sigma2 = prof.ssr(rho_hat) / (prof.n * prof.t)

    # fixed effects: train-window mean of the spatially filtered residual,
    # computed on the standardized (not demeaned) series
    resid = y_tr - rho_hat * spatial_lag(graph, y_tr) - beta * x_tr
    if model == "sdm":
        resid = resid - theta * spatial_lag(graph, x_tr)
    alpha = resid.mean(axis=1)

    return SpatialFit(
        model=model,
        rho=rho_hat,
        beta=beta,
        theta=theta,
        sigma2=float(sigma2),
        alpha=alpha,
        unit_ids=graph.unit_ids,
        loglik_trace=trace_arr,
        rho_interval=prof.interval,
        n_train_years=prof.t,
        fit_warnings=tuple(fit_warnings),
    )


def forecast(fit_result: SpatialFit, x_test: np.ndarray,
             graph: SpatialGraph) -> np.ndarray:
    """Reduced-form forecast: solve (I - rho W) yhat = alpha + beta*x [+ theta*Wx].

    x_test is the (N, T_te) block of standardized regressor values for the
    test years. Solved with a sparse LU factorization shared across test
    years; the infinity-norm residual of every solve is checked against
    1e-8 and a failure raises SolveFailureError.
    """
    if fit_result.unit_ids != graph.unit_ids:
        raise UnitMismatchError("fit and graph disagree on units")
    x_test = np.asarray(x_test, dtype=np.float64)
    if x_test.ndim == 1:
        x_test = x_test[:, None]
    if x_test.shape[0] != graph.n:
        raise ValueError(f"x_test has {x_test.shape[0]} rows, graph has {graph.n} units")

    rhs = fit_result.alpha[:, None] + fit_result.beta * x_test
    if fit_result.model == "sdm":
        rhs = rhs + fit_result.theta * spatial_lag(graph, x_test)

    w = graph.weights_sparse()
    a = (sp.identity(graph.n, format="csc") - fit_result.rho * w.tocsc())
    try:
        lu = spla.splu(a)
        yhat = lu.solve(rhs)
    except RuntimeError as exc:
        raise SolveFailureError(f"sparse LU failed: {exc}")
    resid = np.abs(a @ yhat - rhs).max()
    if not resid < SOLVE_RESIDUAL_TOL:
        raise SolveFailureError(
            f"solve residual {float(resid):.3e} exceeds {SOLVE_RESIDUAL_TOL:.0e}"
        )
    return yhat


def save_fit(fit_result: SpatialFit, prefix: str) -> None:
    """Flat key-value text + fixed-effect CSV + loglik-trace CSV."""
    from ._util import atomic_write, fmt

    with atomic_write(prefix + ".txt") as fh:
        fh.write(f"model {fit_result.model}\n")
        fh.write(f"rho {fmt(fit_result.rho)}\n")
        fh.write(f"beta {fmt(fit_result.beta)}\n")
        if fit_result.theta is not None:
            fh.write(f"theta {fmt(fit_result.theta)}\n")
        fh.write(f"sigma2 {fmt(fit_result.sigma2)}\n")
        fh.write(f"n {len(fit_result.unit_ids)}\n")
        fh.write(f"t_train {fit_result.n_train_years}\n")
    with atomic_write(prefix + "_alpha.csv") as fh:
        fh.write("unit_id,alpha\n")
        for u, a in zip(fit_result.unit_ids, fit_result.alpha):
            fh.write(f"{u},{fmt(a)}\n")
    with atomic_write(prefix + "_trace.csv") as fh:
        fh.write("rho,loglik\n")
        for r, v in fit_result.loglik_trace:
            fh.write(f"{fmt(r)},{fmt(v)}\n")
