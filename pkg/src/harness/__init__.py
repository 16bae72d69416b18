# Experiment orchestration: configs, runs, sweeps, diagnostics and artifacts
from .artifacts import ArtifactWriter, load_manifest
from .config import ExperimentConfig, derive_seed, load_config, profile_config, render_template
from .diagnostics import DIAGNOSTICS, DiagnosticResult, run_diagnostic
from .experiments import (
    SWEEP_AXES, Comparison, SweepResult, build_input_source, make_state, run_baseline, run_comparison,
    run_ode_record, run_sgd_seeds, run_sweep,
)
from .plot_data import FIGURE_TAGS, emit_plot_data
from .report import ComparisonReport, baseline_thresholds, build_report
