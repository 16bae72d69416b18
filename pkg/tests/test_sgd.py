import numpy as np
import pytest

from src.distributions.standardization import InputSource
from src.dynamics.records import load_record, save_record
from src.dynamics.sgd import (
    average_runs, dynamic_error, estimate_eps_g, evaluation_set, run_sgd, sgd_step, value_at,
)
from src.errors import ArtifactError, DivergenceError, InputExhaustedError, ParameterError, TimeGridError
from src.models import NetworkConfig, SgdConfig
from src.network.model import init_gaussian
from tests.conftest import make_record


def test_zero_learning_rate_leaves_weights(small_state):
    W, v = small_state.W.copy(), small_state.v.copy()
    loss = sgd_step(small_state, np.ones(16), eta=0.0)
    np.testing.assert_array_equal(small_state.W, W)
    np.testing.assert_array_equal(small_state.v, v)
    assert loss >= 0


def test_negative_learning_rate_is_rejected(small_state):
    with pytest.raises(ParameterError):
        sgd_step(small_state, np.ones(16), eta=-0.1)


def test_step_uses_pre_update_second_layer(small_state):
    state = small_state
    x_latent = np.random.default_rng(0).standard_normal(16)
    U = x_latent @ state.F / 4.0
    x = np.tanh(U)
    lam = state.W @ x / np.sqrt(32)
    y = np.maximum(x_latent @ state.teacher_W.T / 4.0, 0.0) @ state.teacher_v
    residual = np.maximum(lam, 0.0) @ state.v - y
    expected_W = state.W - (0.2 / np.sqrt(32)) * np.outer(state.v * residual * (lam > 0), x)
    expected_v = state.v - (0.2 / 32) * np.maximum(lam, 0.0) * residual
    sgd_step(state, x_latent, eta=0.2)
    np.testing.assert_allclose(state.W, expected_W)
    np.testing.assert_allclose(state.v, expected_v)


def test_eps_g_is_zero_for_a_copy_of_the_teacher():
    # identity features with F = sqrt(D) I make lambda equal nu
    config = NetworkConfig(N=16, D=16, feature_fn="identity")
    twin = init_gaussian(config, seed=1)
    twin.F = np.sqrt(16) * np.eye(16)
    twin.W = twin.teacher_W.copy()
    twin.v = twin.teacher_v.copy()
    X, y = evaluation_set(twin, np.random.default_rng(2).standard_normal((2000, 16)))
    eps, se = estimate_eps_g(twin, X, y)
    assert eps == pytest.approx(0.0, abs=1e-12)
    assert se == pytest.approx(0.0, abs=1e-12)


def test_divergence_raises(small_state, gaussian_source):
    small_state.v[:] = np.inf
    with pytest.raises(DivergenceError):
        run_sgd(small_state, gaussian_source, SgdConfig(steps=4, stride=2, p_eval=1000))


def test_zero_steps_gives_a_single_snapshot(small_state, gaussian_source):
    record = run_sgd(small_state, gaussian_source, SgdConfig(steps=0, p_eval=1000))
    assert len(record.snapshots) == 1
    assert record.times[0] == 0.0


def test_run_sgd_snapshots_and_seeding(small_state, gaussian_source):
    config = SgdConfig(steps=64, stride=16, p_eval=1000, sample_seed=3)
    a = run_sgd(small_state.copy(), gaussian_source, config)
    b = run_sgd(small_state.copy(), gaussian_source, config)
    np.testing.assert_allclose(a.times, [0.0, 0.5, 1.0, 1.5, 2.0])
    np.testing.assert_array_equal(a.series("eps_g"), b.series("eps_g"))
    assert len(a.meta["eps_g_stderr"]) == 5
    assert a.seeds == {"sample": 3, "eval": 1}


def test_run_sgd_mutates_state(small_state, gaussian_source):
    W0 = small_state.W.copy()
    run_sgd(small_state, gaussian_source, SgdConfig(steps=10, stride=5, p_eval=1000))
    assert not np.array_equal(W0, small_state.W)


def test_matrix_source_too_short(small_state):
    matrix = np.random.default_rng(0).standard_normal((1100, 16))
    source = InputSource(matrix=matrix, mode="none")
    with pytest.raises(InputExhaustedError):
        run_sgd(small_state, source, SgdConfig(steps=2000, stride=100, p_eval=1000))


def test_average_runs():
    a = make_record([0.0, 1.0], [1.0, 0.5])
    b = make_record([0.0, 1.0], [3.0, 1.5], offset=1.0)
    avg = average_runs([a, b])
    np.testing.assert_allclose(avg.series("eps_g").ravel(), [2.0, 1.0])
    np.testing.assert_allclose(avg.snapshots[1].v, [1.5, 1.5])
    assert avg.meta["averaged_runs"] == 2
    assert average_runs([a]) is a
    with pytest.raises(TimeGridError):
        average_runs([a, make_record([0.0, 2.0], [1.0, 1.0])])
    with pytest.raises(ParameterError):
        average_runs([])


def test_value_at_interpolates_and_checks_range():
    rec = make_record([0.0, 1.0, 2.0], [1.0, 0.5, 0.0])
    assert value_at(rec, "eps_g", 0.25)[0] == pytest.approx(0.875)
    with pytest.raises(TimeGridError):
        value_at(rec, "eps_g", 2.5)


def test_dynamic_error_is_euclidean():
    a = make_record([0.0, 1.0], [1.0, 1.0])
    b = make_record([0.0, 1.0], [1.0, 1.0], offset=0.5)
    # Q is 2x2, every entry shifted by 0.5
    assert dynamic_error(a, b, "Q", 1.0) == pytest.approx(1.0)
    assert dynamic_error(a, b, "eps_g", 1.0) == 0.0


def test_record_csv_round_trip(tmp_path):
    rec = make_record([0.0, 0.5, 1.0], [0.3, 0.2, 0.1])
    path = save_record(tmp_path / "rec.csv", rec)
    loaded = load_record(path)
    np.testing.assert_array_equal(loaded.times, rec.times)
    np.testing.assert_array_equal(loaded.series("R"), rec.series("R"))
    with pytest.raises(ArtifactError):
        save_record(path, rec)
