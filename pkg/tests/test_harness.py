import json

import numpy as np
import pandas as pd
import pytest

from src.errors import ArtifactError, ConfigError, ParameterError, TimeGridError
from src.harness.artifacts import ArtifactWriter, load_manifest, write_table
from src.harness.config import derive_seed, load_config, profile_config, render_template
from src.harness.diagnostics import DiagnosticResult
from src.harness.experiments import (
    baseline_key, baseline_seeds, build_input_source, run_comparison, run_jobs, run_sweep, sweep_points,
)
from src.harness.plot_data import emit_plot_data, trajectory_panels
from src.harness.report import baseline_thresholds, build_report, verdict_for
from tests.conftest import make_record


# --- Config ---

def test_desk_profile_derives_D_from_delta():
    config = profile_config("desk")
    assert (config.network.N, config.network.D) == (1024, 512)
    assert config.ode.eta == config.sgd.eta == 0.2
    assert config.tau == pytest.approx(1000 / 1024)


def test_template_round_trips_to_the_profile(tmp_path):
    path = tmp_path / "full.ini"
    path.write_text(render_template("full"), encoding="utf-8")
    config = load_config(path)
    assert config.network.N == 4096
    assert config.seeds.sgd == [1, 2, 3, 4, 5]
    assert config.config_hash() == profile_config("full").config_hash()


def test_config_hash_ignores_output_only(tmp_path):
    a = profile_config("desk", output={"directory": str(tmp_path / "a")})
    b = profile_config("desk", output={"directory": str(tmp_path / "b")})
    c = profile_config("desk", sgd={"eta": 0.1})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()


def test_explicit_ode_eta_is_kept():
    config = profile_config("desk", ode={"eta": 0.05})
    assert config.ode.eta == 0.05 and config.sgd.eta == 0.2


def test_bad_configs_raise_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")
    path = tmp_path / "bad.ini"
    path.write_text("[sgd]\neta = 0.1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="network"):
        load_config(path)
    path.write_text("[network]\nN = 8\nD = 4\n[plots]\ndpi = 300\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="plots"):
        load_config(path)
    path.write_text("[network]\nN = 8\nD = 4\n[sgd]\neta = -1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("[network]\nN = 8\nD = 4\n[input]\nkind = file\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_seed_lists_parse_from_strings(tmp_path):
    path = tmp_path / "seeds.ini"
    path.write_text("[network]\nN = 8\ndelta = 0.5\n[seeds]\nsgd = 3, 1  # two seeds\n", encoding="utf-8")
    config = load_config(path)
    assert config.network.D == 4
    assert config.seeds.sgd == [3, 1]


def test_derive_seed_is_stable_and_tag_dependent():
    assert derive_seed(0, "baseline/0") == derive_seed(0, "baseline/0")
    assert derive_seed(0, "baseline/0") != derive_seed(0, "baseline/1")
    assert derive_seed(0, "baseline/0") != derive_seed(1, "baseline/0")


# --- Reports ---

def test_self_comparison_converges():
    rec = make_record([0.0, 0.5, 1.0], [0.4, 0.3, 0.2])
    report = build_report(rec, rec, tau=0.5)
    assert report.errors == {"eps_g": 0.0, "Q": 0.0, "R": 0.0, "v": 0.0}
    assert report.max_abs_deviation == 0.0
    assert report.verdict == "converged" == report.recomputed_verdict()
    assert len(report.eps_g_gap_grid) == 3


def test_baseline_threshold_and_verdict():
    ode = make_record([0.0, 1.0], [0.5, 0.5])
    baseline = [make_record([0.0, 1.0], [0.5, 0.5 + gap]) for gap in (0.01, 0.03)]
    e_base, sigma_base = baseline_thresholds(baseline, ode, 1.0)
    assert e_base == pytest.approx(0.02)
    assert sigma_base == pytest.approx(np.std([0.01, 0.03], ddof=1))
    sgd = make_record([0.0, 1.0], [0.5, 0.6])
    report = build_report(sgd, ode, baseline, tau=1.0)
    assert report.verdict == "diverged"
    assert report.threshold == pytest.approx(e_base + sigma_base)
    assert verdict_for(0.01, e_base, sigma_base) == "converged"


def test_report_needs_overlapping_times():
    with pytest.raises(TimeGridError):
        build_report(make_record([0.0, 1.0], [1.0, 1.0]), make_record([2.0, 3.0], [1.0, 1.0]), tau=1.0)


# --- Artifacts and plot data ---

def test_writer_refuses_to_overwrite(tmp_path, tiny_experiment):
    writer = ArtifactWriter(tmp_path / "run", tiny_experiment, command="sgd")
    writer.table("t.csv", pd.DataFrame({"x": [1.0, 2.0]}))
    writer.record("rec.csv", make_record([0.0, 1.0], [1.0, 0.5]))
    with pytest.raises(ArtifactError):
        writer.table("t.csv", pd.DataFrame({"x": [3.0]}))
    writer.finish()
    manifest = load_manifest(tmp_path / "run")
    assert manifest["command"] == "sgd"
    assert manifest["config_hash"] == tiny_experiment.config_hash()
    assert manifest["files"] == ["rec.csv", "t.csv"]
    assert json.loads((tmp_path / "run" / "timing.json").read_text())["total_seconds"] >= 0

    again = ArtifactWriter(tmp_path / "run", tiny_experiment, overwrite=True)
    again.table("t.csv", pd.DataFrame({"x": [3.0]}))
    assert pd.read_csv(tmp_path / "run" / "t.csv")["x"].tolist() == [3.0]


def test_tables_use_full_precision(tmp_path):
    path = write_table(tmp_path / "p.csv", pd.DataFrame({"x": [0.1]}))
    assert path.read_text().splitlines()[1] == "0.10000000000000001"


def test_trajectory_panels_are_long_format():
    records = {"SGD": make_record([0.0, 1.0], [1.0, 0.5]), "ODE": make_record([0.0, 1.0], [1.0, 0.4])}
    panels = trajectory_panels(records)
    assert list(panels["eps_g"].columns) == ["t", "series", "value"]
    assert len(panels["eps_g"]) == 4
    assert list(panels["Q"].columns) == ["t", "series", "entry", "value"]
    assert len(panels["Q"]) == 16
    assert set(panels["R"]["entry"]) == {"R_0_0", "R_0_1", "R_1_0", "R_1_1"}


def test_emit_plot_data_checks_tags_and_inputs(tmp_path):
    records = {"SGD": make_record([0.0, 1.0], [1.0, 0.5])}
    paths = emit_plot_data("fig3", records, tmp_path)
    assert sorted(p.name for p in paths) == ["fig3_Q.csv", "fig3_R.csv", "fig3_eps_g.csv", "fig3_v.csv"]
    with pytest.raises(ParameterError):
        emit_plot_data("fig99", records, tmp_path)
    with pytest.raises(ParameterError):
        emit_plot_data("fig2", records, tmp_path)
    with pytest.raises(ParameterError):
        emit_plot_data("fig6", DiagnosticResult("w1", pd.DataFrame({"q": [2]})), tmp_path)
    with pytest.raises(ArtifactError):
        emit_plot_data("fig3", records, tmp_path)


# --- Experiments ---

def test_run_jobs_keeps_submission_order():
    jobs = {key: (lambda key=key: key * 2) for key in (3, 1, 2)}
    assert list(run_jobs(jobs, threads=3).items()) == [(3, 6), (1, 2), (2, 4)]


def test_run_jobs_reraises_failures():
    def boom():
        raise ParameterError("boom")

    with pytest.raises(ParameterError, match="boom"):
        run_jobs({"ok": lambda: 1, "bad": boom}, threads=2)


def test_input_sources_follow_the_config(tiny_experiment):
    mixture = tiny_experiment.input.model_copy(update={"kind": "mixture", "q": 3})
    source = build_input_source(tiny_experiment, mixture, spec_seed=5)
    assert source.D == 16 and source.spec.q == 3
    C = source.take(20_000, seed=1)
    np.testing.assert_allclose(C.mean(axis=0), 0.0, atol=0.05)


def test_baseline_seeds_and_key(tiny_experiment):
    seeds = baseline_seeds(tiny_experiment)
    assert len(seeds) == 3 and len(set(seeds)) == 3
    other = tiny_experiment.model_copy(update={"input": tiny_experiment.input.model_copy(update={"kind": "law"})})
    assert baseline_key(other) == baseline_key(tiny_experiment)


def test_sweep_points(tiny_experiment):
    laws = {p.label: p for p in sweep_points(tiny_experiment, "law")}
    assert laws["lorentz"].input_cfg.standardize == "empirical"
    assert laws["uniform"].input_cfg.standardize == "analytic"
    base, proxy = sweep_points(tiny_experiment, "affine")
    assert base.spec_seed == proxy.spec_seed
    assert proxy.input_cfg.kind == "affine_proxy"
    m_points = sweep_points(tiny_experiment, "m")
    assert [p.value for p in m_points] == tiny_experiment.diagnostics.m_values
    assert len({p.spec_seed for p in m_points}) == len(m_points)
    with pytest.raises(ConfigError):
        sweep_points(tiny_experiment, "beta")


@pytest.mark.slow
def test_comparison_end_to_end(tmp_path, tiny_experiment):
    comparison = run_comparison(tiny_experiment, threads=2, cache_dir=str(tmp_path / "cache"))
    assert len(comparison.sgd_runs) == 2
    assert len(comparison.baseline) == 3
    assert comparison.report.verdict in ("converged", "diverged")
    assert comparison.report.verdict == comparison.report.recomputed_verdict()
    cached = list((tmp_path / "cache").glob("baseline-*/run_*.csv"))
    assert len(cached) == 3
    again = run_comparison(tiny_experiment, threads=2, cache_dir=str(tmp_path / "cache"))
    assert again.report.e_base == pytest.approx(comparison.report.e_base)


@pytest.mark.slow
def test_affine_sweep(tiny_experiment):
    result = run_sweep(tiny_experiment, "affine", threads=2, with_baseline=False)
    assert list(result.table["point"]) == ["mixture", "affine_proxy"]
    assert set(result.averages) == {"mixture", "affine_proxy"}
    assert (result.table["threshold"] == 0.0).all()
    assert result.rank_correlation is None

