"""Experiment orchestration: configuration, composable stages, manifests.

Every stage reads and writes plain files in the output directory so stages
compose across processes; `run_pipeline` chains them in-process. All models
in one run see byte-identical standardized inputs, and a manifest written
at the end carries the full config echo needed to reproduce the run
bitwise (timing fields aside).
"""

from __future__ import annotations

import configparser
import json
import os
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__ as _version
from ._util import atomic_write, fmt
from .baselines import (
    fit_ardl,
    fit_ols_per_unit,
    fit_panel_fe,
    forecast_linear,
    persistence_forecast,
    write_coefficients_csv,
)
from .errors import ConfigError, StageError
from .evaluation import (
    AccuracyReport,
    ForecastSet,
    accuracy,
    dm_from_forecasts,
    read_forecasts_csv,
    write_forecasts_csv,
)
from .graph import SpatialGraph, ingest_edges, remove_islands, write_islands_report
from .neural import (
    NetConfig,
    load_model,
    predict_iterative,
    save_model,
    forward_causal,
    train,
)
from .neural.models import CAUSAL
from .panel import (
    Panel,
    ScalingStats,
    SplitSpec,
    fit_scaling,
    ingest_panel,
    standardize,
    write_panel_csv,
)
from . import disagg as disagg_mod
from . import spatial as spatial_mod

LINEAR_MODELS = ("persistence", "panelfe", "olsper", "ardl")
SPATIAL_MODELS = ("sar", "sdm")
NEURAL_MODELS = ("rnn", "lstm", "bilstm", "gru", "transformer")
ALL_MODELS = LINEAR_MODELS + SPATIAL_MODELS + NEURAL_MODELS

STAGE_EXIT_CODES = {
    "config": 2,
    "ingest": 3,
    "diagnose": 3,
    "graph": 4,
    "fit": 5,
    "forecast": 6,
    "evaluate": 7,
    "dm": 7,
    "report": 7,
    "disagg": 8,
    "synth": 9,
}

REPORT_COLUMNS = ("model", "rmse_norm", "rmse_euro_median", "r2", "dm_vs_reference", "stars")


@dataclass(frozen=True)
class ExperimentConfig:
    nl_csv: str
    income_csv: str
    out_dir: str
    train_start: int
    train_end: int
    test_start: int
    test_end: int
    models: tuple[str, ...]
    reference: str
    edges_csv: str | None = None
    seed: int = 0
    threads: int = 1
    recursive_lags: bool = False
    unit_col: str = "unit_id"
    year_col: str = "year"
    value_col: str = "value"
    neural: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.models)) != len(self.models):
            raise ConfigError("duplicate model names")
        unknown = [m for m in self.models if m not in ALL_MODELS]
        if unknown:
            raise ConfigError(f"unknown models {unknown}; valid: {ALL_MODELS}")
        if self.reference not in self.models:
            raise ConfigError(f"reference {self.reference!r} not in model list")
        if any(m in SPATIAL_MODELS for m in self.models) and not self.edges_csv:
            raise ConfigError("spatial models require an edges csv")

    def validate_paths(self) -> None:
        for path in (self.nl_csv, self.income_csv, self.edges_csv):
            if path and not os.path.exists(path):
                raise ConfigError(f"input file not found: {path}")

    @property
    def split(self) -> SplitSpec:
        return SplitSpec(self.train_start, self.train_end,
                         self.test_start, self.test_end)

    @property
    def schema(self) -> dict[str, str]:
        return {"unit": self.unit_col, "year": self.year_col, "value": self.value_col}

    def net_config(self, arch: str) -> NetConfig:
        kwargs = dict(self.neural)
        kwargs.setdefault("seed", self.seed)
        return NetConfig(arch=arch, **kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["models"] = tuple(d["models"])
        return cls(**d)


_NEURAL_FIELD_TYPES = {
    "hidden": int, "heads": int, "d_k": int, "epochs": int, "batch_size": int,
    "dropout": float, "learning_rate": float, "clip_norm": float,
    "feature_set": str, "seed": int,
}


def load_config(path: str) -> ExperimentConfig:
    """Parse the INI-style experiment configuration."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    try:
        data = cp["data"]
        split = cp["split"]
        models = cp["models"]
    except KeyError as exc:
        raise ConfigError(f"config missing section {exc}")
    neural = {}
    if cp.has_section("neural"):
        for key, raw in cp["neural"].items():
            if key not in _NEURAL_FIELD_TYPES:
                raise ConfigError(f"unknown [neural] option {key!r}")
            neural[key] = _NEURAL_FIELD_TYPES[key](raw)
    run = cp["run"] if cp.has_section("run") else {}
    model_list = tuple(m.strip() for m in models.get("models", "").split(",") if m.strip())
    try:
        return ExperimentConfig(
            nl_csv=data.get("nl"),
            income_csv=data.get("income"),
            edges_csv=data.get("edges", fallback=None),
            out_dir=run.get("out", "out"),
            train_start=int(split["train_start"]),
            train_end=int(split["train_end"]),
            test_start=int(split["test_start"]),
            test_end=int(split["test_end"]),
            models=model_list,
            reference=models.get("reference", model_list[0] if model_list else ""),
            seed=int(run.get("seed", 0)),
            threads=int(run.get("threads", 1)),
            recursive_lags=str(run.get("recursive_lags", "false")).lower()
            in ("1", "true", "yes"),
            unit_col=data.get("unit_col", "unit_id"),
            year_col=data.get("year_col", "year"),
            value_col=data.get("value_col", "value"),
            neural=neural,
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}")


# --- stage primitives ---------------------------------------------------------

@dataclass
class LoadedData:
    nl: Panel
    income: Panel
    nl_std: Panel
    income_std: Panel
    nl_stats: ScalingStats
    income_stats: ScalingStats
    split: SplitSpec


def load_panels(config: ExperimentConfig) -> LoadedData:
    config.validate_paths()
    try:
        nl = ingest_panel(config.nl_csv, config.schema)
        income = ingest_panel(config.income_csv, config.schema)
    except Exception as exc:
        raise StageError("ingest", str(exc)) from exc
    if set(nl.unit_ids) != set(income.unit_ids) or nl.years != income.years:
        raise StageError("ingest", "nightlight and income panels are not aligned")
    if income.unit_ids != nl.unit_ids:
        income = income.subset(nl.unit_ids)
    split = config.split
    split.validate_for(nl)
    nl_stats = fit_scaling(nl, split, variable="nightlights")
    income_stats = fit_scaling(income, split, variable="income")
    return LoadedData(
        nl=nl, income=income,
        nl_std=standardize(nl, nl_stats),
        income_std=standardize(income, income_stats),
        nl_stats=nl_stats, income_stats=income_stats,
        split=split,
    )


def load_graph(config: ExperimentConfig, data: LoadedData,
               out_dir: str | None = None) -> tuple[SpatialGraph, list[str]]:
    try:
        adjacency = ingest_edges(config.edges_csv, data.nl.unit_ids)
        graph, removed = remove_islands(adjacency)
    except Exception as exc:
        raise StageError("graph", str(exc)) from exc
    if out_dir:
        write_islands_report(os.path.join(out_dir, "islands_removed.txt"), removed)
        with atomic_write(os.path.join(out_dir, "graph_summary.txt")) as fh:
            lo, hi = 1.0 / graph.eigenvalues[0], 1.0 / graph.eigenvalues[-1]
            fh.write(f"n_units {graph.n}\n")
            fh.write(f"n_removed {len(removed)}\n")
            fh.write(f"mean_degree {fmt(graph.mean_degree)}\n")
            fh.write(f"n_components {graph.n_components}\n")
            fh.write(f"rho_interval ({fmt(lo)}, {fmt(hi)})\n")
    return graph, removed


def build_features(nl_std: Panel, income_std: Panel, feature_set: str) -> np.ndarray:
    """(N, T, I) input tensor; the lag feature is realized prior-year income
    (zero at the first observed year, i.e. the per-unit train mean)."""
    x = nl_std.values[:, :, None]
    if feature_set == "nl":
        return x
    lag = np.zeros_like(income_std.values)
    lag[:, 1:] = income_std.values[:, :-1]
    return np.concatenate([x, lag[:, :, None]], axis=2)


def fit_and_forecast(config: ExperimentConfig, data: LoadedData, model: str,
                     graph: SpatialGraph | None, out_dir: str | None = None
                     ) -> ForecastSet:
    """Fit one model and produce its standardized test-window predictions."""
    split = data.split
    test_years = tuple(split.test_years)
    if model in LINEAR_MODELS:
        if model == "persistence":
            preds = persistence_forecast(data.income_std, split, config.recursive_lags)
            fit_obj = None
        else:
            fitter = {"panelfe": fit_panel_fe, "olsper": fit_ols_per_unit,
                      "ardl": fit_ardl}[model]
            fit_obj = fitter(data.income_std, data.nl_std, split)
            preds = forecast_linear(fit_obj, data.income_std, data.nl_std, split,
                                    config.recursive_lags)
        if out_dir and fit_obj is not None:
            write_coefficients_csv(fit_obj, os.path.join(out_dir, f"fit_{model}.csv"))
        return ForecastSet(model, data.income_std.unit_ids, test_years, preds)

    if model in SPATIAL_MODELS:
        if graph is None:
            raise StageError("fit", f"{model} requires the spatial graph")
        y_g = data.income_std.subset(graph.unit_ids)
        x_g = data.nl_std.subset(graph.unit_ids)
        sf = spatial_mod.fit(y_g, x_g, graph, split, model)
        if out_dir:
            spatial_mod.save_fit(sf, os.path.join(out_dir, f"fit_{model}"))
        x_test = x_g.values[:, split.test_cols(x_g)]
        preds = spatial_mod.forecast(sf, x_test, graph)
        return ForecastSet(model, graph.unit_ids, test_years, preds)

    # neural
    net_cfg = config.net_config(model)
    features = build_features(data.nl_std, data.income_std, net_cfg.feature_set)
    train_cols = split.train_cols(data.nl_std)
    seq_model, report = train(net_cfg, features[:, train_cols],
                              data.income_std.values[:, train_cols])
    if out_dir:
        save_model(seq_model, os.path.join(out_dir, f"fit_{model}.npz"))
        with atomic_write(os.path.join(out_dir, f"train_{model}.csv")) as fh:
            fh.write("epoch,mse\n")
            for e, v in enumerate(report.epoch_mse):
                fh.write(f"{e},{fmt(v)}\n")
    preds = neural_predictions(seq_model, features, split, data.nl_std)
    return ForecastSet(model, data.income_std.unit_ids, test_years, preds)


def neural_predictions(seq_model, features: np.ndarray, split: SplitSpec,
                       panel: Panel) -> np.ndarray:
    """Test-window predictions under the leakage-safe protocol for the
    model's direction class."""
    test_cols = split.test_cols(panel)
    if seq_model.arch in CAUSAL:
        full = forward_causal(seq_model, features)
        return full[:, test_cols]
    return predict_iterative(seq_model, features, list(test_cols))


# --- reporting ------------------------------------------------------------------

def render_report(reports: dict[str, AccuracyReport], dm_vs_ref: dict[str, object],
                  reference: str) -> str:
    """Aligned text table with the comparison-table column layout."""
    rows = []
    for model, rep in sorted(reports.items(), key=lambda kv: kv[1].rmse_norm):
        if model == reference:
            dm_s, stars = "--", ""
        else:
            dm = dm_vs_ref[model]
            dm_s = "inf" if dm.stat == float("inf") else (
                "-inf" if dm.stat == float("-inf") else f"{dm.stat:+.2f}")
            stars = "***" if dm.p_value < 0.01 else ""
        rows.append((model, f"{rep.rmse_norm:.3f}", f"{rep.rmse_euro_median:.3f}",
                     f"{rep.r2_pooled:+.3f}", dm_s, stars))
    header = ("model", "rmse_norm", "rmse_euro_median", "r2", f"dm_vs_{reference}", "")
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(6)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def write_accuracy_csv(reports: dict[str, AccuracyReport], dm_vs_ref: dict,
                       reference: str, path: str) -> None:
    with atomic_write(path) as fh:
        fh.write(",".join(REPORT_COLUMNS) + "\n")
        for model, rep in sorted(reports.items(), key=lambda kv: kv[1].rmse_norm):
            if model == reference:
                dm_s, stars = "", ""
            else:
                dm = dm_vs_ref[model]
                dm_s = fmt(dm.stat)
                stars = "***" if dm.p_value < 0.01 else ""
            fh.write(f"{model},{fmt(rep.rmse_norm)},{fmt(rep.rmse_euro_median)},"
                     f"{fmt(rep.r2_pooled)},{dm_s},{stars}\n")


def write_dm_matrix(forecasts: dict[str, ForecastSet], realized: Panel,
                    path: str) -> dict[tuple[str, str], object]:
    out = {}
    names = sorted(forecasts)
    with atomic_write(path) as fh:
        fh.write("model_a,model_b,n,d_bar,dm,p_value\n")
        for a in names:
            for b in names:
                if a == b:
                    continue
                res = dm_from_forecasts(forecasts[a], forecasts[b], realized)
                out[(a, b)] = res
                fh.write(f"{a},{b},{res.n},{fmt(res.d_bar)},{fmt(res.stat)},"
                         f"{fmt(res.p_value)}\n")
    return out


# --- full pipeline ----------------------------------------------------------------

def run_pipeline(config: ExperimentConfig) -> dict:
    """ingest -> standardize -> fit/forecast each model -> evaluate -> report.

    Returns the manifest dict (also written to out_dir/manifest.json).
    """
    t0 = time.perf_counter()
    out_dir = config.out_dir
    os.makedirs(out_dir, exist_ok=True)
    _limit_threads(config.threads)

    data = load_panels(config)
    write_panel_csv(data.nl, os.path.join(out_dir, "panel_nl.csv"))
    write_panel_csv(data.income, os.path.join(out_dir, "panel_income.csv"))

    graph = None
    if any(m in SPATIAL_MODELS for m in config.models):
        graph, _ = load_graph(config, data, out_dir)

    forecasts: dict[str, ForecastSet] = {}
    reports: dict[str, AccuracyReport] = {}
    for model in config.models:
        try:
            fs = fit_and_forecast(config, data, model, graph, out_dir)
        except StageError:
            raise
        except Exception as exc:
            raise StageError("fit", f"model {model}: {exc}") from exc
        forecasts[model] = fs
        write_forecasts_csv(fs, os.path.join(out_dir, f"forecast_{model}.csv"))
        reports[model] = accuracy(fs, data.income_std, data.income_stats)

    dm_matrix = write_dm_matrix(forecasts, data.income_std,
                                os.path.join(out_dir, "dm_matrix.csv"))
    dm_vs_ref = {m: dm_matrix[(m, config.reference)]
                 for m in config.models if m != config.reference}
    write_accuracy_csv(reports, dm_vs_ref, config.reference,
                       os.path.join(out_dir, "accuracy.csv"))
    with atomic_write(os.path.join(out_dir, "report.txt")) as fh:
        fh.write(render_report(reports, dm_vs_ref, config.reference))

    from .neural import backend_name

    manifest = {
        "format": "panelcast-manifest-v1",
        "version": _version,
        "config": config.to_dict(),
        "seed": config.seed,
        "kernel_backend": backend_name(),
        "wall_clock_s": time.perf_counter() - t0,
        "artifacts": sorted(
            f for f in os.listdir(out_dir) if f != "manifest.json"
        ),
    }
    with atomic_write(os.path.join(out_dir, "manifest.json")) as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def rerun_from_manifest(manifest_path: str, out_dir: str | None = None) -> dict:
    """Re-execute a pipeline run from its manifest's config echo."""
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "panelcast-manifest-v1":
        raise ConfigError(f"unrecognized manifest format in {manifest_path}")
    config = ExperimentConfig.from_dict(manifest["config"])
    if out_dir is not None:
        config = replace(config, out_dir=out_dir)
    return run_pipeline(config)


def _limit_threads(n: int) -> None:
    if n and n > 0:
        try:
            import threadpoolctl

            threadpoolctl.threadpool_limits(limits=n)
        except ImportError:
            pass
