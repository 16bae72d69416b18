#!/usr/bin/env python3
"""
Hidden-manifold lab command line

Runs online SGD and the order-parameter ODE from the same initial network,
compares them against a Gaussian-input baseline, sweeps input structure and
runs the equivalence diagnostics. Every command writes into one output
directory with a manifest.json (config, config hash, seeds).

Run using: python -m src.run_lab <command> [--config lab.ini] [--out DIR]

Commands:
  gen-config            print or write a commented config template
  sgd                   multi-seed SGD runs and their average
  ode                   ODE trajectory
  compare               SGD average vs ODE with baseline verdict
  diag NAME             w1 | ks-scaling | third-moment | residuals | corr | remainder
  sweep AXIS            m | alpha | q | law | affine
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from .constants import EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_IO, EXIT_OK, PROFILES
from .dynamics.records import load_record
from .dynamics.sgd import average_runs
from .errors import (
    AccuracyError, ArtifactError, ConfigError, CovarianceError, DivergenceError, InputExhaustedError, LabError,
)
from .harness.artifacts import ArtifactWriter
from .harness.config import (
    INPUT_KINDS, STANDARDIZE_MODES, ExperimentConfig, load_config, profile_config, render_template,
)
from .harness.diagnostics import DIAGNOSTICS, run_diagnostic
from .harness.experiments import (
    SWEEP_AXES, build_input_source, make_state, run_comparison, run_ode_record, run_sgd_seeds, run_sweep,
)
from .harness.plot_data import DIAGNOSTIC_FIGURES, TRAJECTORY_FIGURES, emit_plot_data
from .harness.report import build_report
from .network.storage import save_state
from .settings import CACHE_DIR, LOG_LEVEL, THREADS, configure_logging

logger = logging.getLogger(__name__)


EXIT_UNEXPECTED = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="SGD versus ODE dynamics of the hidden manifold model.")
    parser.add_argument("--config", help="INI experiment config (default: the named profile)")
    parser.add_argument("--profile", default="desk", choices=sorted(PROFILES),
                        help="Profile used when no --config is given (default: desk)")
    parser.add_argument("--out", help="Output directory (overrides [output] directory)")
    parser.add_argument("--seeds", help="Comma-separated SGD seeds (overrides [seeds] sgd)")
    parser.add_argument("--threads", type=int, default=THREADS, help=f"Worker threads (default: {THREADS})")
    parser.add_argument("--overwrite", action="store_true", help="Replace existing artifacts")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    parser.add_argument("--no-cache", action="store_true", help="Do not read or write the baseline cache")
    parser.add_argument("--input-kind", choices=INPUT_KINDS, help="Input family (overrides [input] kind)")
    parser.add_argument("--standardize", choices=STANDARDIZE_MODES, help="Standardization (overrides [input] standardize)")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-config", help="Commented config template")
    gen.add_argument("--template", default="full", choices=sorted(PROFILES),
                     help="Template profile (default: full)")
    gen.add_argument("--file", help="Write the template here instead of stdout")

    sub.add_parser("sgd", help="Multi-seed SGD runs and their average")
    sub.add_parser("ode", help="ODE trajectory")

    compare = sub.add_parser("compare", help="SGD vs ODE with baseline verdict")
    compare.add_argument("--sgd-csv", help="Existing SGD record CSV (skips running)")
    compare.add_argument("--ode-csv", help="Existing ODE record CSV (skips running)")
    compare.add_argument("--baseline-csv", nargs="*", default=[], help="Existing baseline record CSVs")
    compare.add_argument("--tau", type=float, help="Evaluation time in units of t (default: tau_steps / N)")
    compare.add_argument("--no-baseline", action="store_true", help="Skip the Gaussian baseline runs")
    compare.add_argument("--figure", choices=TRAJECTORY_FIGURES, help="Also emit plot data for this figure")

    diag = sub.add_parser("diag", help="Equivalence diagnostics")
    diag.add_argument("name", choices=DIAGNOSTICS)
    diag.add_argument("--figure", choices=sorted(DIAGNOSTIC_FIGURES), help="Also emit plot data")

    sweep = sub.add_parser("sweep", help="Input-structure sweeps")
    sweep.add_argument("axis", choices=SWEEP_AXES)
    sweep.add_argument("--no-baseline", action="store_true", help="Skip the Gaussian baseline runs")
    sweep.add_argument("--figure", choices=TRAJECTORY_FIGURES, help="Also emit plot data for this figure")
    return parser


def resolve_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else profile_config(args.profile)
    updates = {}
    if args.seeds:
        seeds = config.seeds.model_validate({**config.seeds.model_dump(), "sgd": args.seeds})
        updates["seeds"] = seeds
    if args.input_kind or args.standardize:
        inputs = {**config.input.model_dump(), "kind": args.input_kind or config.input.kind,
                  "standardize": args.standardize or config.input.standardize}
        updates["input"] = config.input.model_validate(inputs)
    if args.out or args.overwrite:
        output = config.output.model_copy(update={
            "directory": args.out or config.output.directory,
            "overwrite": args.overwrite or config.output.overwrite,
        })
        updates["output"] = output
    return config.model_copy(update=updates) if updates else config


def _writer(config: ExperimentConfig, args) -> ArtifactWriter:
    return ArtifactWriter(config.output.directory, config, overwrite=config.output.overwrite,
                          command=args.command)


def cmd_gen_config(args) -> int:
    text = render_template(args.template)
    if args.file:
        path = Path(args.file)
        if path.exists() and not args.overwrite:
            raise ArtifactError(f"{path} exists; pass --overwrite to replace it")
        path.write_text(text, encoding="utf-8")
        logger.info(f"Wrote {args.template} config template to {path}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sgd(config: ExperimentConfig, args) -> int:
    writer = _writer(config, args)
    state = make_state(config)
    state_dir = writer.path("initial_state")
    if state_dir.exists() and not writer.overwrite:
        raise ArtifactError(f"{state_dir} exists; pass --overwrite to replace it")
    save_state(state_dir, state)
    source = build_input_source(config)
    runs = run_sgd_seeds(config, state, source, threads=args.threads)
    for run in runs:
        writer.record(f"sgd_seed_{run.seeds['sample']}.csv", run)
        writer.timed(f"sgd_seed_{run.seeds['sample']}", run.meta.get("wall_time", 0.0))
    writer.record("sgd_average.csv", average_runs(runs))
    writer.finish()
    return EXIT_OK


def cmd_ode(config: ExperimentConfig, args) -> int:
    writer = _writer(config, args)
    record = run_ode_record(config, make_state(config))
    writer.record("ode.csv", record)
    writer.timed("ode", record.meta.get("wall_time", 0.0))
    writer.note("ode_meta", {k: v for k, v in record.meta.items() if k != "wall_time"})
    writer.finish()
    return EXIT_OK


def cmd_compare(config: ExperimentConfig, args) -> int:
    writer = _writer(config, args)
    cache_dir = None if args.no_cache else CACHE_DIR
    tau = args.tau if args.tau is not None else config.tau
    if args.sgd_csv or args.ode_csv:
        if not (args.sgd_csv and args.ode_csv):
            raise ConfigError("compare on stored records needs both --sgd-csv and --ode-csv")
        sgd, ode = load_record(args.sgd_csv), load_record(args.ode_csv)
        baseline = [load_record(p) for p in args.baseline_csv]
        paths = {"sgd": args.sgd_csv, "ode": args.ode_csv}
        report = build_report(sgd, ode, baseline, tau, paths=paths)
    else:
        comparison = run_comparison(config, args.threads, with_baseline=not args.no_baseline,
                                    cache_dir=cache_dir)
        for run in comparison.sgd_runs:
            writer.record(f"sgd_seed_{run.seeds['sample']}.csv", run)
        sgd, ode = comparison.sgd_average, comparison.ode
        writer.record("sgd_average.csv", sgd)
        writer.record("ode.csv", ode)
        for label, seconds in comparison.timings.items():
            writer.timed(label, seconds)
        report = comparison.report
        report.paths = {"sgd": "sgd_average.csv", "ode": "ode.csv"}
        if tau != report.tau:
            report = build_report(sgd, ode, comparison.baseline, tau, paths=report.paths)
    writer.json("report.json", report.model_dump())
    if args.figure:
        emit_plot_data(args.figure, {"SGD": sgd, "ODE": ode}, writer.directory, writer.overwrite)
    writer.finish()
    logger.info(f"Verdict: {report.verdict} (e_eps_g={report.errors['eps_g']:.4e}, "
                f"threshold={report.threshold:.4e}, max |dev|={report.max_abs_deviation:.4e})")
    return EXIT_OK


def cmd_diag(config: ExperimentConfig, args) -> int:
    writer = _writer(config, args)
    result = run_diagnostic(args.name, config, args.threads)
    stem = f"diag_{args.name.replace('-', '_')}"
    writer.table(f"{stem}.csv", result.table)
    writer.json(f"{stem}_fit.json", result.summary)
    if args.figure:
        emit_plot_data(args.figure, result, writer.directory, writer.overwrite)
    writer.finish()
    return EXIT_OK


def cmd_sweep(config: ExperimentConfig, args) -> int:
    writer = _writer(config, args)
    cache_dir = None if args.no_cache else CACHE_DIR
    result = run_sweep(config, args.axis, args.threads, with_baseline=not args.no_baseline, cache_dir=cache_dir)
    writer.table(f"sweep_{args.axis}.csv", result.table)
    for label, record in result.averages.items():
        writer.record(f"sweep_{args.axis}/{label}.csv", record)
    writer.record(f"sweep_{args.axis}/ode.csv", result.ode)
    writer.json(f"sweep_{args.axis}_summary.json", {
        "axis": args.axis,
        "e_base": result.e_base,
        "sigma_base": result.sigma_base,
        "rank_correlation": result.rank_correlation,
        "spec_seeds": dict(zip(result.table["point"], result.table["spec_seed"].astype(int).tolist())),
    })
    if args.figure:
        series = {**result.averages, "ODE": result.ode}
        emit_plot_data(args.figure, series, writer.directory, writer.overwrite)
    writer.note("master_spec_seed", config.seeds.spec)
    writer.finish()
    return EXIT_OK


COMMANDS = {
    "sgd": cmd_sgd,
    "ode": cmd_ode,
    "compare": cmd_compare,
    "diag": cmd_diag,
    "sweep": cmd_sweep,
}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (DivergenceError, AccuracyError, CovarianceError)):
        return EXIT_DIVERGENCE
    if isinstance(exc, (OSError, ArtifactError, InputExhaustedError)):
        return EXIT_IO
    if isinstance(exc, (LabError, ValidationError)):
        return EXIT_CONFIG
    return EXIT_UNEXPECTED


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging("DEBUG" if args.verbose else LOG_LEVEL)

    try:
        if args.command == "gen-config":
            return cmd_gen_config(args)
        config = resolve_config(args)
        logger.info(f"Command {args.command}: N={config.network.N}, D={config.network.D}, "
                    f"K={config.network.K}, M={config.network.M}, hash {config.config_hash()[:12]}")
        return COMMANDS[args.command](config, args)
    except (LabError, ValidationError, OSError) as e:
        code = exit_code_for(e)
        logger.error(f"{args.command} failed ({type(e).__name__}, exit {code}): {e}")
        return code
    except Exception as e:
        logger.exception(f"An unexpected error occurred during {args.command}: {e}")
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
