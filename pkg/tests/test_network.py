import numpy as np
import pytest

from src.errors import ArtifactError, ShapeError
from src.gauss_integrals.nonlinearities import nonlinearity_stats
from src.models import NetworkConfig
from src.network.model import check_shapes, forward, init_gaussian, measure_order_params
from src.network.storage import load_state, save_state


def test_init_is_seeded_and_shaped(small_config):
    a = init_gaussian(small_config, seed=1)
    b = init_gaussian(small_config, seed=1)
    check_shapes(a)
    np.testing.assert_array_equal(a.W, b.W)
    np.testing.assert_array_equal(a.F, b.F)
    assert a.F.shape == (16, 32)


def test_normalized_features_have_squared_norm_D(small_config):
    state = init_gaussian(small_config, seed=2, normalize_F=True)
    np.testing.assert_allclose((state.F ** 2).sum(axis=0), small_config.D)


def test_copy_is_independent(small_state):
    clone = small_state.copy()
    clone.W += 1.0
    assert not np.allclose(clone.W, small_state.W)
    assert clone.F is small_state.F


def test_check_shapes_names_the_offender(small_state):
    small_state.v = np.zeros(3)
    with pytest.raises(ShapeError, match="v"):
        check_shapes(small_state)


def test_forward_pass_definitions(small_state):
    C = np.random.default_rng(0).standard_normal((5, 16))
    out = forward(small_state, C)
    np.testing.assert_allclose(out.U, C @ small_state.F / 4.0)
    np.testing.assert_allclose(out.X, np.tanh(out.U))
    np.testing.assert_allclose(out.nu, C @ small_state.teacher_W.T / 4.0)
    np.testing.assert_allclose(out.lam, out.X @ small_state.W.T / np.sqrt(32))
    np.testing.assert_allclose(out.y, np.maximum(out.nu, 0.0) @ small_state.teacher_v)
    with pytest.raises(ShapeError):
        forward(small_state, C[:, :8])


def test_order_params_reduce_to_overlaps_for_identity_features():
    config = NetworkConfig(N=40, D=40, feature_fn="identity")
    state = init_gaussian(config, seed=4)
    op = measure_order_params(state, nonlinearity_stats("identity").consts)
    S = state.W @ state.F.T / np.sqrt(40)
    np.testing.assert_allclose(op.Q, S @ S.T / 40)
    np.testing.assert_allclose(op.R, S @ state.teacher_W.T / 40)
    np.testing.assert_allclose(op.T, state.teacher_W @ state.teacher_W.T / 40)


def test_order_params_match_empirical_covariance():
    # Q and R are the covariances of the centered preactivations under Gaussian inputs
    config = NetworkConfig(N=256, D=128, feature_fn="tanh")
    state = init_gaussian(config, seed=5, normalize_F=True)
    a, b, c = nonlinearity_stats("tanh").consts
    op = measure_order_params(state, (a, b, c))
    C = np.random.default_rng(1).standard_normal((40_000, 128))
    out = forward(state, C)
    lam = out.lam - out.lam.mean(axis=0)
    np.testing.assert_allclose(lam.T @ lam / len(C), op.Q, atol=0.1 * np.abs(op.Q).max())
    np.testing.assert_allclose(lam.T @ out.nu / len(C), op.R, atol=0.1 * np.abs(op.Q).max())


def test_state_round_trip(tmp_path, small_state):
    save_state(tmp_path / "state", small_state)
    loaded = load_state(tmp_path / "state")
    np.testing.assert_array_equal(loaded.W, small_state.W)
    np.testing.assert_array_equal(loaded.teacher_v, small_state.teacher_v)
    assert loaded.config == small_state.config
    with pytest.raises(ArtifactError):
        load_state(tmp_path / "missing")
