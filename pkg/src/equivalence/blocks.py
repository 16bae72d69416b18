import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ..errors import ParameterError
from ..gauss_integrals.nonlinearities import nonlinearity_stats
from ..models import NetworkState
from ..network.model import centered_preactivations, forward

logger = logging.getLogger(__name__)

TARGETS = ("U", "nu", "lambda")


@dataclass
class BlockStatistic:
    """Per-block contributions T_b to one preactivation, P x n_blocks."""
    target: str
    index: int
    contributions: np.ndarray = field(repr=False)
    sigma: float

    @property
    def Z(self) -> np.ndarray:
        return self.contributions / self.sigma

    @property
    def total(self) -> np.ndarray:
        return self.contributions.sum(axis=1)


def check_partition(partition: Sequence[Sequence[int]], D: int):
    covered = np.sort(np.concatenate([np.asarray(b, dtype=int) for b in partition]))
    if covered.shape != (D,) or not np.array_equal(covered, np.arange(D)):
        raise ParameterError(f"Block partition does not cover 0..{D - 1} exactly")


def block_sums(C: np.ndarray, weights: np.ndarray, partition: Sequence[Sequence[int]]) -> np.ndarray:
    order = np.concatenate([np.asarray(b, dtype=int) for b in partition])
    starts = np.cumsum([0] + [len(b) for b in partition[:-1]])
    return np.add.reduceat(C[:, order] * weights[order], starts, axis=1)


def _target_weights(target: str, state: NetworkState, index: int, consts) -> np.ndarray:
    """Coefficients w_r with T_b = sum_{r in b} w_r C_r."""
    D, N = state.config.D, state.config.N
    if target == "U":
        if not 0 <= index < N:
            raise ParameterError(f"U index {index} outside 0..{N - 1}")
        return state.F[:, index] / np.sqrt(D)
    if target == "nu":
        if not 0 <= index < state.config.M:
            raise ParameterError(f"nu index {index} outside 0..{state.config.M - 1}")
        return state.teacher_W[index] / np.sqrt(D)
    if target == "lambda":
        if not 0 <= index < state.config.K:
            raise ParameterError(f"lambda index {index} outside 0..{state.config.K - 1}")
        b = consts[1]
        # linear path L_k = (1 / sqrt(N)) sum_i W_ki U_i
        S_k = state.W[index] @ state.F.T / np.sqrt(N)
        return b * S_k / np.sqrt(D)
    raise ParameterError(f"Unknown block-statistic target {target!r}; expected one of {TARGETS}")


def block_statistic(target: str, state: NetworkState, C, partition: List[List[int]], index: int,
                    consts=None) -> BlockStatistic:
    """Blockwise decomposition of U_i, nu_m or the linear part of lambda_k.

    The normalizer is the empirical std-dev of the summed target.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    D = state.config.D
    if C.shape[1] != D:
        raise ParameterError(f"Inputs have {C.shape[1]} columns, network expects D={D}")
    check_partition(partition, D)
    consts = consts or nonlinearity_stats(state.config.feature_fn).consts
    weights = _target_weights(target, state, index, consts)
    contributions = block_sums(C, weights, partition)
    sigma = float(contributions.sum(axis=1).std())
    if not sigma > 0:
        raise ParameterError(f"{target}[{index}] has zero variance on these inputs")
    return BlockStatistic(target=target, index=index, contributions=contributions, sigma=sigma)


def third_moment_sum(stat: BlockStatistic) -> float:
    """sum_b mean |Z_b|^3."""
    return float(np.sum(np.mean(np.abs(stat.Z) ** 3, axis=0)))


def lambda_remainder_ratio(state: NetworkState, C, k: int, consts=None) -> float:
    """Var(lambda_k - b L_k) / Var(lambda_k), with lambda_k centered by a."""
    consts = consts or nonlinearity_stats(state.config.feature_fn).consts
    a = consts[0]
    lam = centered_preactivations(state, forward(state, C).lam, a)[:, k]
    linear = np.atleast_2d(C) @ _target_weights("lambda", state, k, consts)
    total_var = lam.var()
    if not total_var > 0:
        raise ParameterError(f"lambda_{k} has zero variance on these inputs")
    return float((lam - linear).var() / total_var)


def z_variance_sum(stat: BlockStatistic, ddof: int = 0) -> float:
    """sum_b Var(Z_b); equals 1 up to sampling error for independent blocks."""
    return float(np.sum(stat.Z.var(axis=0, ddof=ddof)))
