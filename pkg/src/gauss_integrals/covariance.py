import logging
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..constants import PSD_FLOOR, PSD_TOLERANCE
from ..errors import CovarianceError

logger = logging.getLogger(__name__)

_floor_lock = threading.Lock()
_floor_events = 0


def floor_events() -> int:
    """Number of covariances clipped by floor_psd since the last reset."""
    return _floor_events


def reset_floor_events():
    global _floor_events
    with _floor_lock:
        _floor_events = 0


def floor_psd(cov, floor: float = PSD_FLOOR) -> np.ndarray:
    """Symmetrize and clip eigenvalues below `floor`.

    Raises CovarianceError when the matrix is clearly indefinite rather than
    marginally so. Only clips at a positive floor are counted; floor=0 is
    round-off cleanup of covariances that are singular by construction.
    """
    global _floor_events
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    cov = 0.5 * (cov + cov.T)
    w, V = np.linalg.eigh(cov)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[0] < -PSD_TOLERANCE * scale:
        raise CovarianceError(float(w[0]))
    if w[0] >= floor:
        return cov
    if floor > 0.0:
        with _floor_lock:
            _floor_events += 1
        logger.debug(f"Flooring covariance eigenvalue {w[0]:.3e} to {floor:.0e}")
    w = np.maximum(w, floor)
    return (V * w) @ V.T


def psd_sqrt(cov) -> np.ndarray:
    """L with L @ L.T == cov, valid for singular covariances."""
    cov = floor_psd(cov, floor=0.0)
    w, V = np.linalg.eigh(cov)
    return V * np.sqrt(np.maximum(w, 0.0))


@dataclass
class GaussianMoments:
    """Zero-mean (unless `mean` is given) Gaussian of dimension p."""
    cov: np.ndarray
    mean: Optional[np.ndarray] = None

    def __post_init__(self):
        self.cov = floor_psd(self.cov, floor=0.0)
        if self.mean is not None:
            self.mean = np.asarray(self.mean, dtype=float)
            if self.mean.shape != (self.p,):
                raise ValueError(f"mean shape {self.mean.shape} does not match dimension {self.p}")

    @property
    def p(self) -> int:
        return self.cov.shape[0]
