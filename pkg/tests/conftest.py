import numpy as np
import pytest

from src.distributions.specs import ScalarLawSpec
from src.distributions.standardization import InputSource
from src.harness.config import profile_config
from src.models import NetworkConfig, OrderParams, RunRecord
from src.network.model import init_gaussian

STANDARD_GAUSSIAN = ScalarLawSpec(law="gaussian", params={"loc": 0.0, "scale": 1.0})


@pytest.fixture
def small_config():
    return NetworkConfig(N=32, D=16)


@pytest.fixture
def small_state(small_config):
    return init_gaussian(small_config, seed=3)


@pytest.fixture
def gaussian_source(small_config):
    return InputSource(spec=STANDARD_GAUSSIAN, D=small_config.D, mode="none")


@pytest.fixture
def tiny_experiment(tmp_path):
    return profile_config(
        "desk",
        network={"N": 32, "D": 16},
        sgd={"steps": 64, "stride": 16, "p_eval": 1000},
        ode={"dt": 0.05, "t_end": 2.0, "n_bins": 16, "stride": 4},
        diagnostics={"tau_steps": 32, "baseline_repeats": 3},
        seeds={"sgd": "1,2"},
        output={"directory": str(tmp_path / "out")},
    )


def make_record(times, eps_g, K=2, M=2, offset=0.0):
    """Synthetic record whose overlaps drift linearly in t."""
    snapshots = []
    for t, eps in zip(times, eps_g):
        snapshots.append(OrderParams(
            t=float(t),
            Q=np.eye(K) * (1.0 + t) + offset,
            R=np.full((K, M), 0.1 * t) + offset,
            T=np.eye(M),
            v=np.ones(K) + offset,
            eps_g=float(eps),
        ))
    return RunRecord(config={}, seeds={}, snapshots=snapshots)
