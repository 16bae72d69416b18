import logging
from typing import NamedTuple

import numpy as np

from ..errors import ParameterError, ShapeError
from ..gauss_integrals.nonlinearities import get_nonlinearity, nonlinearity_stats
from ..gauss_integrals.oracle import price_stein_cross, scaled_moments
from ..models import NetworkState

logger = logging.getLogger(__name__)

MIN_RESIDUAL_SAMPLES = 10_000


class Residuals(NamedTuple):
    R1: float
    R2: float
    stderr1: float
    stderr2: float


def residuals_from_projections(state: NetworkState, U_pair, c_r, i: int, j: int, r: int) -> Residuals:
    """R1 and R2 from the projections (U_i, U_j) and the latent coordinate C_r.

    U_pair is P x 2 with columns U_i, U_j; c_r holds C_r for the same rows.
    """
    U_pair = np.asarray(U_pair, dtype=float)
    c_r = np.asarray(c_r, dtype=float).ravel()
    P = U_pair.shape[0]
    if U_pair.ndim != 2 or U_pair.shape[1] != 2:
        raise ShapeError("U_pair", (P, 2), U_pair.shape)
    if c_r.shape != (P,):
        raise ShapeError("c_r", (P,), c_r.shape)
    if P < MIN_RESIDUAL_SAMPLES:
        raise ParameterError(f"Residuals need at least {MIN_RESIDUAL_SAMPLES} samples, got {P}")
    if i == j:
        raise ParameterError("R1 needs two distinct indices i != j")
    D = state.config.D
    F = state.F
    f = get_nonlinearity(state.config.feature_fn).fn
    stats = nonlinearity_stats(state.config.feature_fn)

    fU = f(U_pair)
    s_ii = float(F[:, i] @ F[:, i] / D)
    s_jj = float(F[:, j] @ F[:, j] / D)
    s_ij = float(F[:, i] @ F[:, j] / D)

    prod = fU[:, 0] * fU[:, 1]
    theory1 = price_stein_cross(stats, stats, s_ii, s_jj, s_ij, 1.0)
    R1 = abs(float(prod.mean()) - theory1)

    cross = fU[:, 0] * c_r
    _, e_uf = scaled_moments(stats, s_ii)
    theory2 = F[r, i] / np.sqrt(D) * e_uf / s_ii
    R2 = abs(float(cross.mean()) - float(theory2))

    return Residuals(R1=R1, R2=R2, stderr1=float(prod.std(ddof=1) / np.sqrt(P)),
                     stderr2=float(cross.std(ddof=1) / np.sqrt(P)))


def residuals(state: NetworkState, C, i: int, j: int, r: int) -> Residuals:
    """Deviations of mixed moments of f(U) from their Gaussian-theory values.

    R1 = |E[f(U_i) f(U_j)] - (E f E f + Cov(U_i, U_j) E[U f] E[U f] / (s_i s_j))|
    R2 = |E[f(U_i) C_r] - F_ri / sqrt(D) * E[U_i f(U_i)] / s_i|
    where s_i = Var(U_i) under standardized Gaussian inputs; for
    column-normalized F these reduce to a^2 + b^2 Cov and F_ri b / sqrt(D).
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    D = state.config.D
    if C.shape[1] != D:
        raise ShapeError("C", (C.shape[0], D), C.shape)
    if not 0 <= r < D:
        raise ParameterError(f"Latent index r={r} outside 0..{D - 1}")
    U_pair = C @ state.F[:, [i, j]] / np.sqrt(D)
    return residuals_from_projections(state, U_pair, C[:, r], i, j, r)
