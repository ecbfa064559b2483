"""N x T panel container, leakage-safe standardization, and panel diagnostics.

The panel is strictly rectangular: every unit is observed in every year and
every value is finite. Standardization is municipality-specific with
statistics computed over the training window only, so test-year values can
never influence the scale.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import (
    DegenerateUnitError,
    DuplicateCellError,
    MissingCellError,
    NonFiniteValueError,
    RaggedYearsError,
    SchemaError,
    UnitMismatchError,
)

DEFAULT_SCHEMA = {"unit": "unit_id", "year": "year", "value": "value"}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Panel:
    """One variable observed for N units over T consecutive years."""

    unit_ids: tuple[str, ...]
    years: tuple[int, ...]
    values: np.ndarray  # shape (N, T), float64, read-only

    def __post_init__(self):
        vals = _frozen(self.values)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "unit_ids", tuple(self.unit_ids))
        object.__setattr__(self, "years", tuple(int(y) for y in self.years))
        n, t = len(self.unit_ids), len(self.years)
        if vals.shape != (n, t):
            raise ValueError(f"values shape {vals.shape} != ({n}, {t})")
        if len(set(self.unit_ids)) != n:
            raise ValueError("unit_ids are not unique")
        if any(b - a != 1 for a, b in zip(self.years, self.years[1:])):
            raise ValueError("years must be strictly increasing with unit step")
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals))[0]
            raise NonFiniteValueError(
                f"non-finite value for unit {self.unit_ids[bad[0]]}, year {self.years[bad[1]]}"
            )

    @property
    def n(self) -> int:
        return len(self.unit_ids)

    @property
    def t(self) -> int:
        return len(self.years)

    def year_index(self, year: int) -> int:
        try:
            return self.years.index(year)
        except ValueError:
            raise ValueError(f"year {year} not in panel ({self.years[0]}..{self.years[-1]})")

    def subset(self, unit_ids: Sequence[str]) -> "Panel":
        """Restrict to the given units, in the given order."""
        pos = {u: i for i, u in enumerate(self.unit_ids)}
        missing = [u for u in unit_ids if u not in pos]
        if missing:
            raise UnitMismatchError(f"units not in panel: {missing[:5]}")
        idx = np.array([pos[u] for u in unit_ids], dtype=np.intp)
        return Panel(tuple(unit_ids), self.years, self.values[idx])

    def with_values(self, values: np.ndarray) -> "Panel":
        return Panel(self.unit_ids, self.years, values)


@dataclass(frozen=True)
class SplitSpec:
    """Contiguous train window followed immediately by the test window."""

    train_start: int
    train_end: int
    test_start: int
    test_end: int

    def __post_init__(self):
        if self.train_end - self.train_start + 1 < 3:
            raise ValueError("training window must span at least 3 years")
        if self.test_start != self.train_end + 1:
            raise ValueError("test window must immediately follow the train window")
        if self.test_end < self.test_start:
            raise ValueError("empty test window")

    @property
    def n_train(self) -> int:
        return self.train_end - self.train_start + 1

    @property
    def n_test(self) -> int:
        return self.test_end - self.test_start + 1

    @property
    def train_years(self) -> range:
        return range(self.train_start, self.train_end + 1)

    @property
    def test_years(self) -> range:
        return range(self.test_start, self.test_end + 1)

    def validate_for(self, panel: Panel) -> None:
        if self.train_start < panel.years[0] or self.test_end > panel.years[-1]:
            raise ValueError(
                f"split {self.train_start}-{self.test_end} not contained in panel "
                f"years {panel.years[0]}-{panel.years[-1]}"
            )

    def train_cols(self, panel: Panel) -> np.ndarray:
        self.validate_for(panel)
        i0 = panel.year_index(self.train_start)
        return np.arange(i0, i0 + self.n_train)

    def test_cols(self, panel: Panel) -> np.ndarray:
        self.validate_for(panel)
        i0 = panel.year_index(self.test_start)
        return np.arange(i0, i0 + self.n_test)


@dataclass(frozen=True)
class ScalingStats:
    """Per-unit train-window mean and standard deviation (n-1 divisor)."""

    unit_ids: tuple[str, ...]
    mean: np.ndarray  # (N,)
    sd: np.ndarray    # (N,)
    variable: str = ""

    def __post_init__(self):
        object.__setattr__(self, "unit_ids", tuple(self.unit_ids))
        object.__setattr__(self, "mean", _frozen(self.mean))
        object.__setattr__(self, "sd", _frozen(self.sd))
        if not np.all(self.sd > 0):
            bad = [self.unit_ids[i] for i in np.flatnonzero(~(self.sd > 0))]
            raise DegenerateUnitError(bad, context=f"sd <= 0 for variable '{self.variable}'")

    def subset(self, unit_ids: Sequence[str]) -> "ScalingStats":
        pos = {u: i for i, u in enumerate(self.unit_ids)}
        idx = np.array([pos[u] for u in unit_ids], dtype=np.intp)
        return ScalingStats(tuple(unit_ids), self.mean[idx], self.sd[idx], self.variable)


def fit_scaling(panel: Panel, split: SplitSpec, variable: str = "") -> ScalingStats:
    """Mean/sd over train years only; test-year values have zero influence.

    Raises DegenerateUnitError listing every unit whose train window is
    constant (the standardization is undefined there).
    """
    cols = split.train_cols(panel)
    train = panel.values[:, cols]
    mean = train.mean(axis=1)
    sd = train.std(axis=1, ddof=1)
    zero = ~(sd > 0)
    if zero.any():
        raise DegenerateUnitError(
            [panel.unit_ids[i] for i in np.flatnonzero(zero)],
            context=f"constant train window, variable '{variable}'",
        )
    return ScalingStats(panel.unit_ids, mean, sd, variable)


def _check_aligned(panel: Panel, stats: ScalingStats) -> None:
    if panel.unit_ids != stats.unit_ids:
        raise UnitMismatchError("panel and scaling stats disagree on unit ordering")


def standardize(panel: Panel, stats: ScalingStats) -> Panel:
    _check_aligned(panel, stats)
    return panel.with_values((panel.values - stats.mean[:, None]) / stats.sd[:, None])


def destandardize(panel: Panel, stats: ScalingStats) -> Panel:
    _check_aligned(panel, stats)
    return panel.with_values(panel.values * stats.sd[:, None] + stats.mean[:, None])


# --- descriptive diagnostics --------------------------------------------------

@dataclass(frozen=True)
class DiagnosticsReport:
    """Within-unit correlation and AR(1) persistence across the panel.

    Degenerate units (either variable constant over the sample) carry NaN in
    the per-unit vectors and are flagged, never silently dropped; summary
    statistics are computed over the non-degenerate units.
    """

    unit_ids: tuple[str, ...]
    within_corr: np.ndarray   # (N,), NaN where degenerate
    ar1_coef: np.ndarray      # (N,), NaN where degenerate
    degenerate: np.ndarray    # (N,) bool
    corr_median: float
    corr_iqr: tuple[float, float]
    corr_share_above: dict[float, float]
    ar1_median: float
    ar1_iqr: tuple[float, float]


def ar1_coefficients(panel: Panel) -> np.ndarray:
    """Per-unit OLS slope of y_t on (1, y_{t-1}) over all T years.

    Returns NaN for units whose lagged series has zero variance.
    """
    y = panel.values
    y_lag = y[:, :-1]
    y_cur = y[:, 1:]
    lag_mean = y_lag.mean(axis=1, keepdims=True)
    cur_mean = y_cur.mean(axis=1, keepdims=True)
    sxx = ((y_lag - lag_mean) ** 2).sum(axis=1)
    sxy = ((y_lag - lag_mean) * (y_cur - cur_mean)).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(sxx > 0, sxy / np.where(sxx > 0, sxx, 1.0), np.nan)
    return phi


def diagnostics(nl: Panel, income: Panel,
                thresholds: Sequence[float] = (0.3, 0.5)) -> DiagnosticsReport:
    """Within-unit Pearson correlation of the two variables plus income AR(1)."""
    if nl.unit_ids != income.unit_ids or nl.years != income.years:
        raise UnitMismatchError("panels must share unit ids and years")
    a = nl.values - nl.values.mean(axis=1, keepdims=True)
    b = income.values - income.values.mean(axis=1, keepdims=True)
    na = np.sqrt((a * a).sum(axis=1))
    nb = np.sqrt((b * b).sum(axis=1))
    degenerate = (na == 0) | (nb == 0)
    denom = np.where(degenerate, 1.0, na * nb)
    corr = np.where(degenerate, np.nan, (a * b).sum(axis=1) / denom)
    corr = np.clip(corr, -1.0, 1.0)

    phi = ar1_coefficients(income)
    degenerate = degenerate | ~np.isfinite(phi)

    ok_corr = corr[np.isfinite(corr)]
    ok_phi = phi[np.isfinite(phi)]
    if ok_corr.size == 0 or ok_phi.size == 0:
        raise DegenerateUnitError(list(nl.unit_ids), context="every unit degenerate")
    share = {float(th): float((ok_corr > th).mean()) for th in thresholds}
    return DiagnosticsReport(
        unit_ids=nl.unit_ids,
        within_corr=corr,
        ar1_coef=phi,
        degenerate=degenerate,
        corr_median=float(np.median(ok_corr)),
        corr_iqr=(float(np.percentile(ok_corr, 25)), float(np.percentile(ok_corr, 75))),
        corr_share_above=share,
        ar1_median=float(np.median(ok_phi)),
        ar1_iqr=(float(np.percentile(ok_phi, 25)), float(np.percentile(ok_phi, 75))),
    )


# --- CSV ingestion -------------------------------------------------------------

def ingest_panel(source: TextIO | str, schema: dict[str, str] | None = None) -> Panel:
    """Read a long-format CSV (one row per unit-year) into a rectangular Panel.

    The panel must be complete: a unit missing a year that other units have
    raises MissingCellError; units observed over systematically different
    ranges (no unit covers the full year span) raise RaggedYearsError.
    """
    schema = dict(DEFAULT_SCHEMA, **(schema or {}))
    close = False
    if isinstance(source, str):
        source = open(source, "r", encoding="utf-8", newline="")
        close = True
    try:
        reader = csv.DictReader(source)
        if reader.fieldnames is None:
            raise SchemaError("empty CSV stream")
        for key in ("unit", "year", "value"):
            if schema[key] not in reader.fieldnames:
                raise SchemaError(
                    f"column '{schema[key]}' not found in header {reader.fieldnames}"
                )
        cells: dict[str, dict[int, float]] = {}
        order: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            unit = row[schema["unit"]]
            try:
                year = int(row[schema["year"]])
            except (TypeError, ValueError):
                raise NonFiniteValueError(f"line {lineno}: unparseable year {row[schema['year']]!r}")
            try:
                value = float(row[schema["value"]])
            except (TypeError, ValueError):
                raise NonFiniteValueError(f"line {lineno}: unparseable value {row[schema['value']]!r}")
            if not math.isfinite(value):
                raise NonFiniteValueError(f"non-finite value for unit {unit}, year {year}")
            if unit not in cells:
                cells[unit] = {}
                order.append(unit)
            if year in cells[unit]:
                raise DuplicateCellError(f"duplicate cell for unit {unit}, year {year}")
            cells[unit][year] = value
    finally:
        if close:
            source.close()

    if not order:
        raise SchemaError("CSV contains a header but no data rows")
    all_years = sorted({y for ys in cells.values() for y in ys})
    full = set(all_years)
    complete = [u for u in order if set(cells[u]) == full]
    if len(complete) != len(order):
        if not complete:
            spans = {(min(ys), max(ys)) for ys in cells.values()}
            raise RaggedYearsError(
                f"no unit covers the full year span {all_years[0]}-{all_years[-1]}; "
                f"observed spans: {sorted(spans)[:5]}"
            )
        bad = next(u for u in order if set(cells[u]) != full)
        missing = sorted(full - set(cells[bad]))[0]
        raise MissingCellError(f"unit {bad} is missing year {missing}")
    gaps = [y for a, y in zip(all_years, all_years[1:]) if y - a != 1]
    if gaps:
        raise MissingCellError(f"year {gaps[0] - 1}+1 gap: no unit observed in between")

    values = np.array([[cells[u][y] for y in all_years] for u in order], dtype=np.float64)
    return Panel(tuple(order), tuple(all_years), values)


def write_panel_csv(panel: Panel, path: str, schema: dict[str, str] | None = None) -> None:
    """Inverse of ingest_panel, long format, full float round-trip."""
    schema = dict(DEFAULT_SCHEMA, **(schema or {}))
    from ._util import atomic_write

    with atomic_write(path) as fh:
        fh.write(f"{schema['unit']},{schema['year']},{schema['value']}\n")
        for i, unit in enumerate(panel.unit_ids):
            for j, year in enumerate(panel.years):
                fh.write(f"{unit},{year},{float(panel.values[i, j])!r}\n")
