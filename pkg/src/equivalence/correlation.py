import logging
from typing import NamedTuple, Optional

import numpy as np

from ..errors import ParameterError, ShapeError
from ..models import NetworkState

logger = logging.getLogger(__name__)

MIN_CORRELATION_SAMPLES = 10_000


class CorrelationDiagnostics(NamedTuple):
    L_nu: float
    L_U: float
    L_W: float

    @property
    def total(self) -> float:
        return self.L_nu + self.L_U + self.L_W


def gaussian_reference(P: int, D: int, seed: int) -> np.ndarray:
    """Standard-normal inputs the diagnostics compare against."""
    return np.random.default_rng(seed).standard_normal((P, D))


def _cov(Y: np.ndarray) -> np.ndarray:
    return np.atleast_2d(np.cov(Y, rowvar=False))


def _weighted_inputs(C: np.ndarray, teacher_W: np.ndarray) -> np.ndarray:
    """W~_m,r C_r stacked over (sample, coordinate) pairs, shape (P * D) x M."""
    return (C[:, None, :] * teacher_W[None, :, :]).transpose(0, 2, 1).reshape(-1, teacher_W.shape[0])


def _covariances(state: NetworkState, C: np.ndarray, units: np.ndarray):
    D = state.config.D
    nu = C @ state.teacher_W.T / np.sqrt(D)
    U = C @ state.F[:, units] / np.sqrt(D)
    return _cov(nu), _cov(U), _cov(_weighted_inputs(C, state.teacher_W))


def correlation_diagnostics(state: NetworkState, C, reference_seed: int,
                            max_units: Optional[int] = None) -> CorrelationDiagnostics:
    """Element-wise L1 distances between covariances under C and under Gaussian inputs.

    L_nu compares Cov(nu), L_U compares Cov(U) over the first max_units
    coordinates of U, L_W compares Cov of the teacher-weighted inputs.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    P, D = C.shape
    if D != state.config.D:
        raise ShapeError("C", (P, state.config.D), C.shape)
    if P < MIN_CORRELATION_SAMPLES:
        raise ParameterError(f"Correlation diagnostics need at least {MIN_CORRELATION_SAMPLES} samples, got {P}")
    n_units = state.config.N if max_units is None else min(max_units, state.config.N)
    units = np.arange(n_units)
    Z = gaussian_reference(P, D, reference_seed)
    cov_c = _covariances(state, C, units)
    cov_z = _covariances(state, Z, units)
    L_nu, L_U, L_W = (float(np.abs(a - b).sum()) for a, b in zip(cov_c, cov_z))
    logger.debug(f"L_corr: nu={L_nu:.4e}, U={L_U:.4e}, W={L_W:.4e}")
    return CorrelationDiagnostics(L_nu=L_nu, L_U=L_U, L_W=L_W)
