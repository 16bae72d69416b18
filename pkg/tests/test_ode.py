import numpy as np
import pytest
from scipy.integrate import trapezoid

from src.dynamics.ode import assemble_eps_g, assemble_overlaps, initial_ode_state, run_ode
from src.dynamics.sgd import average_runs
from src.dynamics.spectral import build_spectral_grid, mp_density, mp_support, spectral_density_gap
from src.errors import GridMismatchError, ParameterError
from src.gauss_integrals.nonlinearities import nonlinearity_stats
from src.harness.config import profile_config
from src.harness.experiments import build_input_source, make_state, run_ode_record, run_sgd_seeds
from src.harness.report import eps_g_gaps
from src.models import NetworkConfig, OdeConfig
from src.network.model import init_gaussian, measure_order_params


def test_mp_support_and_normalization():
    lo, hi = mp_support(0.5)
    assert lo == pytest.approx((1 - np.sqrt(0.5)) ** 2)
    assert hi == pytest.approx((1 + np.sqrt(0.5)) ** 2)
    x = np.linspace(lo, hi, 200_001)
    mass = trapezoid(mp_density(x, 0.5), x)
    assert mass == pytest.approx(1.0, abs=1e-3)
    assert mp_density(np.array([hi + 0.1]), 0.5)[0] == 0.0


def test_grids_are_probability_vectors(small_state):
    empirical = build_spectral_grid(small_state, "empirical", 16)
    assert empirical.p_bin.sum() == pytest.approx(1.0)
    assert empirical.eigvecs.shape == (16, 16)
    analytic = build_spectral_grid(small_state, "analytic", 64)
    assert analytic.p_bin.sum() == pytest.approx(1.0)
    assert spectral_density_gap(analytic) < 0.05
    with pytest.raises(ParameterError):
        build_spectral_grid(small_state, "histogram", 16)


def test_analytic_grid_has_an_atom_above_delta_one():
    state = init_gaussian(NetworkConfig(N=16, D=32), seed=0)
    grid = build_spectral_grid(state, "analytic", 16)
    assert grid.p_bin[0] == pytest.approx(0.5)
    assert grid.rho_bin[0] == 0.0
    assert grid.p_bin.sum() == pytest.approx(1.0)


def test_initial_overlaps_match_weight_space(small_state):
    consts = nonlinearity_stats("tanh").consts
    grid = build_spectral_grid(small_state, "empirical", 16)
    ode_state = initial_ode_state(small_state, grid, consts)
    Q, R = assemble_overlaps(ode_state, grid, consts)
    measured = measure_order_params(small_state, consts)
    np.testing.assert_allclose(Q, measured.Q, atol=1e-8)
    np.testing.assert_allclose(R, measured.R, atol=1e-8)
    np.testing.assert_allclose(ode_state.T, measured.T, atol=1e-12)


def test_density_fields_need_an_empirical_grid(small_state):
    grid = build_spectral_grid(small_state, "analytic", 16)
    with pytest.raises(GridMismatchError):
        initial_ode_state(small_state, grid, nonlinearity_stats("tanh").consts)


def test_eps_g_vanishes_for_a_perfect_student():
    T = np.array([[1.0, 0.2], [0.2, 0.8]])
    v = np.array([0.7, -0.4])
    assert assemble_eps_g(T, T, T, v, v) == pytest.approx(0.0, abs=1e-8)
    assert assemble_eps_g(T, np.zeros((2, 2)), T, v, v) > 0


def test_eps_g_of_linear_networks():
    Q = np.array([[2.0]])
    R = np.array([[0.5]])
    T = np.array([[1.0]])
    # (1/2) E[(lam - nu)^2] = (Q - 2R + T) / 2
    assert assemble_eps_g(Q, R, T, [1.0], [1.0], "identity", "identity") == pytest.approx(1.0)


@pytest.mark.slow
def test_zero_learning_rate_keeps_overlaps(small_state):
    record = run_ode(small_state, OdeConfig(dt=0.05, t_end=0.2, n_bins=16, eta=0.0, stride=2))
    first, last = record.snapshots[0], record.snapshots[-1]
    np.testing.assert_allclose(last.Q, first.Q)
    np.testing.assert_allclose(last.R, first.R)
    assert last.eps_g == pytest.approx(first.eps_g)


@pytest.mark.slow
def test_run_ode_snapshots_and_meta(small_state):
    record = run_ode(small_state, OdeConfig(dt=0.05, t_end=0.5, n_bins=16, eta=0.2, stride=5))
    np.testing.assert_allclose(record.times, [0.0, 0.25, 0.5])
    assert record.meta["grid_mode"] == "empirical"
    assert record.meta["n_bins"] == 16
    assert record.meta["regularized_denominators"] >= 0
    assert all(np.isfinite(s.eps_g) for s in record.snapshots)
    assert not np.allclose(record.snapshots[-1].v, small_state.v)


@pytest.mark.slow
def test_well_conditioned_run_reports_no_psd_floors(small_state):
    record = run_ode(small_state, OdeConfig(dt=0.05, t_end=0.5, n_bins=16, eta=0.2, stride=5))
    assert record.meta["psd_floor_events"] == 0


def _short_ode(state, **overrides):
    settings = {"dt": 0.02, "t_end": 2.0, "n_bins": 32, "eta": 0.2, "stride": 10}
    settings.update(overrides)
    return run_ode(state, OdeConfig(**settings))


@pytest.mark.slow
def test_halving_dt_barely_moves_eps_g():
    state = init_gaussian(NetworkConfig(N=128, D=64), seed=4)
    coarse = _short_ode(state)
    fine = _short_ode(state, dt=0.01, stride=20)
    np.testing.assert_allclose(fine.times, coarse.times)
    eps_coarse = coarse.series("eps_g")[:, 0]
    eps_fine = fine.series("eps_g")[:, 0]
    np.testing.assert_allclose(eps_fine, eps_coarse, rtol=0.01)


@pytest.mark.slow
def test_refining_the_spectral_grid_barely_moves_eps_g():
    state = init_gaussian(NetworkConfig(N=256, D=128), seed=4)
    coarse = _short_ode(state, n_bins=64, dt=0.05, stride=4)
    fine = _short_ode(state, n_bins=128, dt=0.05, stride=4)
    np.testing.assert_allclose(fine.series("eps_g")[:, 0], coarse.series("eps_g")[:, 0], rtol=0.01)


@pytest.mark.slow
def test_ode_tracks_seed_averaged_sgd_on_gaussian_inputs(tmp_path):
    config = profile_config(
        "desk",
        network={"N": 512, "D": 256},
        ode={"t_end": 10.0},
        seeds={"sgd": "1, 2, 3, 4, 5"},
        output={"directory": str(tmp_path)},
    )
    state = make_state(config)
    runs = run_sgd_seeds(config, state, build_input_source(config), threads=5)
    ode = run_ode_record(config, state)
    gaps = eps_g_gaps(average_runs(runs), ode)
    assert len(gaps) > 100
    assert max(gap for _, gap in gaps) <= 0.01
