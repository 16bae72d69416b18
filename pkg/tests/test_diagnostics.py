import numpy as np
import pytest

from src.errors import ConfigError
from src.harness.config import profile_config
from src.harness.diagnostics import diagnostic_state, run_diagnostic
from src.harness.plot_data import emit_plot_data


@pytest.fixture
def diag_config(tmp_path):
    return profile_config(
        "desk",
        diagnostics={
            "D_values": "32", "m_values": "1, 2, 4, 8, 16, 32", "q_values": "2, 4", "alpha_values": "0.1, 1, 5",
            "samples": 10_000, "third_moment_samples": 2_000, "third_moment_replicates": 2,
            "residual_triples": 3, "corr_samples": 10_000, "corr_units": 16,
        },
        output={"directory": str(tmp_path)},
    )


def test_diagnostic_state_is_square_and_normalized(diag_config):
    state = diagnostic_state(diag_config, 32)
    assert state.F.shape == (32, 32)
    np.testing.assert_allclose((state.F ** 2).sum(axis=0), 32.0)


def test_w1_table(diag_config):
    result = run_diagnostic("w1", diag_config)
    assert len(result.table) == 6
    assert (result.table["statistic"] >= 0).all()
    small = result.table[result.table["alpha"] == 0.1]["statistic"]
    assert (small < 0.15).all()
    assert set(result.summary["rank_trend_by_q"]) == {"2", "4"}


def test_third_moment_sweep_and_plot_data(tmp_path, diag_config):
    result = run_diagnostic("third-moment", diag_config, threads=2)
    assert list(result.table["m"]) == [1, 2, 4, 8, 16, 32]
    assert (result.table["statistic"] > 0).all()
    assert result.table["z_variance_sum"].between(0.0, 2.0).all()
    assert "slope" in result.summary["fits"]["32"]
    assert (result.table["replicates"] == 2).all()
    assert np.isfinite(result.table["stderr"]).all()
    assert result.summary["replicates"] == 2
    (path,) = emit_plot_data("fig6", result, tmp_path / "plots")
    assert path.name == "fig6.csv"


def test_ks_scaling(diag_config):
    result = run_diagnostic("ks-scaling", diag_config, threads=2)
    assert set(result.table.columns) >= {"m", "D", "m_over_D", "statistic", "stderr", "third_moment_sum"}
    assert (result.table["statistic"].between(0.0, 1.0)).all()
    assert result.summary["berry_esseen_constant"] >= (
        result.table["statistic"] / result.table["third_moment_sum"]).max() - 1e-12


@pytest.mark.slow
def test_residual_and_corr_sweeps(diag_config):
    residual = run_diagnostic("residuals", diag_config, threads=2)
    assert set(residual.table["quantity"]) == {"R1", "R2"}
    assert len(residual.table) == 12
    corr = run_diagnostic("corr", diag_config, threads=2)
    assert set(corr.table["quantity"]) == {"L_nu", "L_U", "L_W", "L_total"}
    assert "rank_trend_m" in corr.summary


def test_remainder_sweep(diag_config):
    result = run_diagnostic("remainder", diag_config)
    assert result.table["statistic"].between(0.0, 1.0).all()
    assert "rank_trend_m_over_D" in result.summary


def test_diagnostic_errors(diag_config):
    with pytest.raises(ConfigError):
        run_diagnostic("spectrum", diag_config)
    too_coarse = diag_config.model_copy(update={
        "diagnostics": diag_config.diagnostics.model_copy(update={"m_values": [64]})})
    with pytest.raises(ConfigError):
        run_diagnostic("remainder", too_coarse)


def _scaling_config(tmp_path, **diagnostics):
    return profile_config("desk", diagnostics={"m_values": "1, 2, 4, 8, 16, 32, 64", **diagnostics},
                          output={"directory": str(tmp_path)})


@pytest.mark.slow
def test_third_moment_curves_collapse_with_square_root_slope(tmp_path):
    config = _scaling_config(tmp_path, D_values="1024, 2048", third_moment_samples=1_000,
                             third_moment_replicates=8)
    result = run_diagnostic("third-moment", config, threads=4)
    for D in ("1024", "2048"):
        assert result.summary["fits"][D]["slope"] == pytest.approx(0.5, abs=0.1)
    assert result.summary["collapse_gap"] <= 0.10


@pytest.mark.slow
def test_ks_distance_scales_with_square_root_in_mid_range(tmp_path):
    config = _scaling_config(tmp_path, D_values="512, 1024", samples=100_000)
    result = run_diagnostic("ks-scaling", config, threads=4)
    for D in ("512", "1024"):
        assert result.summary["fits"][D]["slope"] == pytest.approx(0.5, abs=0.15)


@pytest.mark.slow
def test_residuals_scale_with_square_root_in_mid_range(tmp_path):
    config = _scaling_config(tmp_path, D_values="512, 1024", samples=100_000)
    result = run_diagnostic("residuals", config, threads=4)
    for quantity in ("R1", "R2"):
        for D in ("512", "1024"):
            assert result.summary["fits"][quantity][D]["slope"] == pytest.approx(0.5, abs=0.15)
