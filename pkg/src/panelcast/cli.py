"""Command-line interface: batch pipeline stages over plain files.

Every stage reads/writes CSV (or flat text) artifacts in the output
directory so stages compose: `synth` fabricates input panels, `ingest`
through `report` mirror the pipeline stages, and `run` chains everything
and writes a manifest sufficient for a bitwise re-run.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from ._util import atomic_write, fmt
from .errors import ConfigError, PanelcastError, StageError
from .evaluation import accuracy, dm_from_forecasts, read_forecasts_csv
from .panel import diagnostics, write_panel_csv
from .pipeline import (
    ALL_MODELS,
    STAGE_EXIT_CODES,
    ExperimentConfig,
    build_features,
    fit_and_forecast,
    load_config,
    load_graph,
    load_panels,
    render_report,
    rerun_from_manifest,
    run_pipeline,
    write_accuracy_csv,
)
from . import disagg as disagg_mod
from . import synth as synth_mod


def _add_common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, help="experiment config (INI)")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    p.add_argument("--threads", type=int, help="BLAS/thread cap (overrides config)")
    p.add_argument("--recursive-lags", action="store_true", default=None,
                   help="condition lagged-income forecasts on model output, not realized values")
    p.add_argument("--models", help="comma-separated model list (overrides config)")
    p.add_argument("--reference", help="reference model for DM columns (overrides config)")


def _config_from_args(args) -> ExperimentConfig:
    config = load_config(args.config)
    overrides = {}
    if args.out:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.recursive_lags is not None:
        overrides["recursive_lags"] = args.recursive_lags
    if args.models:
        overrides["models"] = tuple(m.strip() for m in args.models.split(","))
    if args.reference:
        overrides["reference"] = args.reference
    return replace(config, **overrides) if overrides else config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panelcast",
        description="panel nowcasting benchmark suite",
    )
    parser.add_argument("--version", action="version", version=f"panelcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute the full pipeline")
    _add_common(p, config_required=False)
    p.add_argument("--manifest", help="re-run from a previous manifest")

    for name, help_text in [
        ("ingest", "validate input panels and write canonical copies"),
        ("diagnose", "within-correlation and AR(1) persistence diagnostics"),
        ("graph", "build the contiguity graph, remove islands, report spectrum"),
        ("evaluate", "accuracy metrics for stored forecasts"),
        ("report", "render the comparison table from stored forecasts"),
        ("disagg", "Chow-Lin monthly disaggregation of the income panel"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)

    p = sub.add_parser("fit", help="fit one model and store its artifacts")
    p.add_argument("model", choices=ALL_MODELS)
    _add_common(p)

    p = sub.add_parser("forecast", help="fit one model and write its forecasts")
    p.add_argument("model", choices=ALL_MODELS)
    _add_common(p)

    p = sub.add_parser("dm", help="Diebold-Mariano test between two stored forecast sets")
    p.add_argument("model_a", help="first model name")
    p.add_argument("model_b", help="second model name")
    _add_common(p)

    p = sub.add_parser("synth", help="generate a synthetic panel (and edges for spatial DGPs)")
    p.add_argument("dgp", choices=synth_mod.DGPS)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--t", type=int, default=10)
    p.add_argument("--rho", type=float, default=0.7)
    p.add_argument("--beta", type=float, default=0.04)
    p.add_argument("--theta", type=float, default=0.05)
    p.add_argument("--phi", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.67)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start-year", type=int, default=2012)
    return parser


def _out_dir(config: ExperimentConfig) -> str:
    os.makedirs(config.out_dir, exist_ok=True)
    return config.out_dir


def cmd_run(args) -> int:
    if args.manifest:
        manifest = rerun_from_manifest(args.manifest, args.out)
    else:
        if not args.config:
            raise ConfigError("run requires --config or --manifest")
        manifest = run_pipeline(_config_from_args(args))
    out = manifest["config"]["out_dir"]
    print(f"pipeline complete: {len(manifest['artifacts'])} artifacts in {out}")
    return 0


def cmd_ingest(args) -> int:
    config = _config_from_args(args)
    data = load_panels(config)
    out = _out_dir(config)
    write_panel_csv(data.nl, os.path.join(out, "panel_nl.csv"))
    write_panel_csv(data.income, os.path.join(out, "panel_income.csv"))
    print(f"nl: {data.nl.n} units x {data.nl.t} years "
          f"({data.nl.years[0]}-{data.nl.years[-1]})")
    print(f"income: {data.income.n} units x {data.income.t} years")
    return 0


def cmd_diagnose(args) -> int:
    config = _config_from_args(args)
    data = load_panels(config)
    out = _out_dir(config)
    rep = diagnostics(data.nl, data.income)
    with atomic_write(os.path.join(out, "diagnostics.csv")) as fh:
        fh.write("unit_id,within_corr,ar1_coef,degenerate\n")
        for i, u in enumerate(rep.unit_ids):
            fh.write(f"{u},{fmt(rep.within_corr[i])},{fmt(rep.ar1_coef[i])},"
                     f"{int(rep.degenerate[i])}\n")
    print(f"within correlation: median {rep.corr_median:.3f} "
          f"IQR [{rep.corr_iqr[0]:.3f}, {rep.corr_iqr[1]:.3f}]")
    for th, share in rep.corr_share_above.items():
        print(f"  share above {th:.2f}: {share:.3f}")
    print(f"AR(1) persistence: median {rep.ar1_median:.3f} "
          f"IQR [{rep.ar1_iqr[0]:.3f}, {rep.ar1_iqr[1]:.3f}]")
    return 0


def cmd_graph(args) -> int:
    config = _config_from_args(args)
    if not config.edges_csv:
        raise ConfigError("graph stage requires [data] edges in the config")
    data = load_panels(config)
    out = _out_dir(config)
    graph, removed = load_graph(config, data, out)
    lo, hi = 1.0 / graph.eigenvalues[0], 1.0 / graph.eigenvalues[-1]
    print(f"kept {graph.n} units, removed {len(removed)} islands, "
          f"mean degree {graph.mean_degree:.2f}, components {graph.n_components}")
    print(f"admissible rho interval ({lo:.4f}, {hi:.4f})")
    return 0


def _fit_forecast(args, write_forecast: bool) -> int:
    config = _config_from_args(args)
    if args.model not in config.models:
        config = replace(config, models=tuple(config.models) + (args.model,))
    data = load_panels(config)
    out = _out_dir(config)
    graph = None
    if args.model in ("sar", "sdm"):
        graph, _ = load_graph(config, data, out)
    fs = fit_and_forecast(config, data, args.model, graph, out)
    if write_forecast:
        from .evaluation import write_forecasts_csv

        write_forecasts_csv(fs, os.path.join(out, f"forecast_{args.model}.csv"))
        print(f"wrote forecast_{args.model}.csv ({len(fs.unit_ids)} units, "
              f"years {fs.test_years[0]}-{fs.test_years[-1]})")
    else:
        print(f"fitted {args.model} (artifacts in {out})")
    return 0


def cmd_fit(args) -> int:
    return _fit_forecast(args, write_forecast=False)


def cmd_forecast(args) -> int:
    return _fit_forecast(args, write_forecast=True)


def _stored_forecasts(config: ExperimentConfig, data, models) -> dict:
    out = config.out_dir
    found = {}
    for model in models:
        path = os.path.join(out, f"forecast_{model}.csv")
        if not os.path.exists(path):
            raise StageError("evaluate", f"missing stored forecast {path}; "
                             f"run `panelcast forecast {model}` first")
        found[model] = read_forecasts_csv(path, model)
    return found


def cmd_evaluate(args) -> int:
    config = _config_from_args(args)
    data = load_panels(config)
    forecasts = _stored_forecasts(config, data, config.models)
    reports = {m: accuracy(fs, data.income_std, data.income_stats)
               for m, fs in forecasts.items()}
    dm_vs_ref = {m: dm_from_forecasts(fs, forecasts[config.reference], data.income_std)
                 for m, fs in forecasts.items() if m != config.reference}
    write_accuracy_csv(reports, dm_vs_ref, config.reference,
                       os.path.join(config.out_dir, "accuracy.csv"))
    print(f"wrote accuracy.csv for {len(reports)} models")
    return 0


def cmd_report(args) -> int:
    config = _config_from_args(args)
    data = load_panels(config)
    forecasts = _stored_forecasts(config, data, config.models)
    reports = {m: accuracy(fs, data.income_std, data.income_stats)
               for m, fs in forecasts.items()}
    dm_vs_ref = {m: dm_from_forecasts(fs, forecasts[config.reference], data.income_std)
                 for m, fs in forecasts.items() if m != config.reference}
    table = render_report(reports, dm_vs_ref, config.reference)
    with atomic_write(os.path.join(config.out_dir, "report.txt")) as fh:
        fh.write(table)
    print(table, end="")
    return 0


def cmd_dm(args) -> int:
    config = _config_from_args(args)
    data = load_panels(config)
    forecasts = _stored_forecasts(config, data, (args.model_a, args.model_b))
    res = dm_from_forecasts(forecasts[args.model_a], forecasts[args.model_b],
                            data.income_std)
    print(f"DM({args.model_a} vs {args.model_b}): stat {res.stat:+.4f}  "
          f"p {res.p_value:.6f}  n {res.n}  d_bar {res.d_bar:+.6f}")
    if res.zero_variance:
        print("warning: zero variance in loss differentials")
    return 0


def cmd_disagg(args) -> int:
    config = _config_from_args(args)
    data = load_panels(config)
    out = _out_dir(config)
    monthly = disagg_mod.disaggregate_panel(data.income)
    disagg_mod.write_monthly_csv(monthly, os.path.join(out, "monthly_income.csv"))
    diag = disagg_mod.persistence_diagnostic(monthly)
    with atomic_write(os.path.join(out, "disagg_summary.txt")) as fh:
        fh.write(f"median_phi_monthly {fmt(diag.median)}\n")
        fh.write(f"iqr_low {fmt(diag.iqr[0])}\n")
        fh.write(f"iqr_high {fmt(diag.iqr[1])}\n")
        fh.write(f"implied_annual {fmt(diag.implied_annual)}\n")
    print(f"monthly series written; median phi_m {diag.median:.4f} "
          f"(implied annual {diag.implied_annual:.4f})")
    return 0


def cmd_synth(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.dgp in ("sar", "sdm"):
        side = int(round(args.n ** 0.5))
        spec = synth_mod.DgpSpec(
            dgp=args.dgp, n=side * side, t=args.t, rho=args.rho, beta=args.beta,
            theta=args.theta if args.dgp == "sdm" else 0.0,
            noise_sd=args.noise, seed=args.seed, start_year=args.start_year)
        draw = synth_mod.gen_spatial_panel(spec)
        synth_mod.write_edges_csv(draw.graph, os.path.join(args.out, "edges.csv"))
        x, y = draw.x, draw.y
    elif args.dgp == "hetero":
        spec = synth_mod.DgpSpec(dgp="hetero", n=args.n, t=args.t, phi=args.phi,
                                 noise_sd=args.noise, seed=args.seed,
                                 start_year=args.start_year)
        draw = synth_mod.gen_hetero_panel(spec)
        x, y = draw.x, draw.y
    else:
        spec = synth_mod.DgpSpec(dgp=args.dgp, n=args.n, t=args.t, phi=args.phi,
                                 noise_sd=args.noise, seed=args.seed,
                                 start_year=args.start_year)
        x, y = synth_mod.gen_ar1_panel(spec)
    write_panel_csv(x, os.path.join(args.out, "nl.csv"))
    write_panel_csv(y, os.path.join(args.out, "income.csv"))
    print(f"wrote {args.dgp} panel: {x.n} units x {x.t} years in {args.out}")
    return 0


_COMMANDS = {
    "run": cmd_run,
    "ingest": cmd_ingest,
    "diagnose": cmd_diagnose,
    "graph": cmd_graph,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "dm": cmd_dm,
    "disagg": cmd_disagg,
    "synth": cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return STAGE_EXIT_CODES.get(exc.stage, 1)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return STAGE_EXIT_CODES["config"]
    except PanelcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
