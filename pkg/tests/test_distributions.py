import numpy as np
import pytest
from pydantic import ValidationError

from src.distributions import (
    BlockMixtureSpec, InputSource, MixtureSpec, ScalarLawSpec, affine_proxy_of, sample, standardize,
    named_law, uniform_partition,
)
from src.distributions.matrix_io import load_matrix, load_spec, save_matrix, save_spec
from src.distributions.standardization import empirical_record
from src.errors import (
    ArtifactError, DegenerateColumnError, InputExhaustedError, ModelError, ParameterError, UnsupportedMomentsError,
)


def test_uniform_partition_with_short_last_block():
    assert uniform_partition(10, 4) == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]]
    assert uniform_partition(3, 8) == [[0, 1, 2]]
    with pytest.raises(ParameterError):
        uniform_partition(4, 0)


def test_mixture_draw_respects_ranges():
    spec = MixtureSpec.draw(D=50, q=4, alpha=2.0, beta=3.0, seed=1)
    mu, sd, w = spec.arrays
    assert mu.shape == (50, 4)
    assert np.all((mu >= -2.0) & (mu < 2.0))
    assert np.all((sd > 0) & (sd < 3.0))
    np.testing.assert_allclose(w.sum(axis=1), 1.0)


def test_mixture_draw_is_seeded():
    a = MixtureSpec.draw(D=5, q=2, alpha=1.0, beta=2.0, seed=7)
    b = MixtureSpec.draw(D=5, q=2, alpha=1.0, beta=2.0, seed=7)
    assert a.means == b.means and a.weights == b.weights


def test_mixture_rejects_unnormalized_weights():
    with pytest.raises(ValidationError):
        MixtureSpec(q=2, means=[[0.0, 1.0]], stds=[[1.0, 1.0]], weights=[[0.5, 0.6]])


def test_mixture_sample_moments_match_analytic():
    spec = MixtureSpec.draw(D=4, q=3, alpha=1.0, beta=2.0, seed=4)
    C = sample(spec, 200_000, seed=0)
    mean, std = spec.moments()
    np.testing.assert_allclose(C.mean(axis=0), mean, atol=0.03)
    np.testing.assert_allclose(C.std(axis=0), std, rtol=0.02)


def test_block_mixture_covers_dimensions_and_sizes():
    spec = BlockMixtureSpec.draw(D=10, m=4, q=2, seed=3)
    assert [blk.size for blk in spec.blocks] == [4, 4, 2]
    C = sample(spec, 1000, seed=1)
    assert C.shape == (1000, 10)
    assert np.all(np.isfinite(C))


def test_block_mixture_within_block_correlation():
    spec = BlockMixtureSpec.from_constants(D=6, m=3, weights=[1.0], levels=[0.0], rho=0.6)
    C = sample(spec, 100_000, seed=2)
    corr = np.corrcoef(C, rowvar=False)
    assert corr[0, 1] == pytest.approx(0.6, abs=0.02)
    assert abs(corr[0, 3]) < 0.02


def test_block_mixture_non_pd_component_is_rejected():
    with pytest.raises(ModelError):
        BlockMixtureSpec.from_constants(D=4, m=4, weights=[1.0], levels=[0.0], rho=-0.5)


def test_named_laws_and_moments():
    uniform = named_law("uniform")
    mean, std = uniform.moments(3)
    np.testing.assert_allclose(mean, 5.0)
    np.testing.assert_allclose(std, 10.0 / np.sqrt(12.0))
    with pytest.raises(UnsupportedMomentsError):
        named_law("lorentz").moments(3)
    with pytest.raises(ParameterError):
        named_law("weibull")


def test_named_law_parameters():
    beta1, beta2 = named_law("beta1"), named_law("beta2")
    assert beta1.params == {"a": 0.5, "b": 0.5}
    assert beta2.params == {"a": 5.0, "b": 1.0}
    mean, std = beta2.moments(2)
    np.testing.assert_allclose(mean, 5.0 / 6.0)
    np.testing.assert_allclose(std, np.sqrt(5.0 / (36.0 * 7.0)))
    mean, std = named_law("poisson").moments(2)
    np.testing.assert_allclose(mean, 2.0)
    np.testing.assert_allclose(std, np.sqrt(2.0))
    # pareto alpha=5 on [1, inf): mean 5/4, variance 5/48
    mean, std = named_law("pareto").moments(2)
    np.testing.assert_allclose(mean, 1.25)
    np.testing.assert_allclose(std, np.sqrt(5.0 / 48.0))
    with pytest.raises(ParameterError):
        named_law("beta")


def test_gaussian_mixture_law_is_seeded():
    assert named_law("gaussian_mixture", seed=1) == named_law("gaussian_mixture", seed=1)
    assert named_law("gaussian_mixture", seed=1) != named_law("gaussian_mixture", seed=2)


def test_scalar_law_validates_params():
    with pytest.raises(ValidationError):
        ScalarLawSpec(law="uniform", params={"a": 1.0, "b": 0.0})
    with pytest.raises(ValidationError):
        ScalarLawSpec(law="poisson", params={})


def test_affine_proxy_keeps_first_two_moments():
    spec = MixtureSpec.draw(D=3, q=2, alpha=1.0, beta=2.0, seed=5)
    proxy = affine_proxy_of(spec)
    mean, std = spec.moments()
    p_mean, p_std = proxy.moments(3)
    np.testing.assert_allclose(p_mean, mean)
    np.testing.assert_allclose(p_std, std)


def test_standardize_modes():
    spec = named_law("poisson")
    C = sample(spec, 50_000, seed=3, D=4)
    emp, record = standardize(C, "empirical")
    np.testing.assert_allclose(emp.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(emp.std(axis=0), 1.0)
    assert record.mode == "empirical"
    ana, _ = standardize(C, "analytic", spec)
    np.testing.assert_allclose(ana.mean(axis=0), 0.0, atol=0.05)
    raw, _ = standardize(C, "none")
    np.testing.assert_array_equal(raw, C)
    with pytest.raises(ParameterError):
        standardize(C, "analytic")


def test_empirical_record_rejects_constant_column():
    C = np.random.default_rng(0).standard_normal((100, 3))
    C[:, 1] = 2.0
    with pytest.raises(DegenerateColumnError):
        empirical_record(C)


def test_input_source_stream_is_reproducible():
    source = InputSource(spec=named_law("laplace"), D=5, mode="analytic")
    a = source.take(5000, seed=11)
    b = source.take(5000, seed=11)
    c = source.take(5000, seed=12)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_empirical_source_fits_pilot_once():
    source = InputSource(spec=named_law("beta2"), D=3, mode="empirical", pilot_rows=20_000)
    record = source.fit()
    assert source.fit() is record
    C = source.take(20_000, seed=1)
    np.testing.assert_allclose(C.mean(axis=0), 0.0, atol=0.05)
    np.testing.assert_allclose(C.std(axis=0), 1.0, atol=0.05)


def test_matrix_source_exhausts():
    matrix = np.random.default_rng(1).standard_normal((30, 4))
    source = InputSource(matrix=matrix, mode="empirical")
    assert source.take(30, seed=0).shape == (30, 4)
    with pytest.raises(InputExhaustedError):
        source.take(31, seed=0)


def test_matrix_and_spec_files(tmp_path):
    matrix = np.random.default_rng(2).standard_normal((7, 3))
    np.testing.assert_array_equal(load_matrix(save_matrix(tmp_path / "c.bin", matrix)), matrix)
    np.testing.assert_allclose(load_matrix(save_matrix(tmp_path / "c.csv", matrix)), matrix, rtol=1e-14)
    (tmp_path / "bad.bin").write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(ArtifactError):
        load_matrix(tmp_path / "bad.bin")

    spec = BlockMixtureSpec.draw(D=6, m=3, q=2, seed=0)
    assert load_spec(save_spec(tmp_path / "spec.json", spec)).model_dump() == spec.model_dump()
