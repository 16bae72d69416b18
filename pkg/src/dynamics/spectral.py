import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import GridMismatchError, ParameterError
from ..models import NetworkState

logger = logging.getLogger(__name__)

GRID_MODES = ("empirical", "analytic")


def mp_support(delta: float):
    """Marchenko-Pastur support endpoints (1 -/+ sqrt(delta))^2."""
    s = np.sqrt(delta)
    return (1.0 - s) ** 2, (1.0 + s) ** 2


def mp_density(rho, delta: float) -> np.ndarray:
    """Continuous part of the MP density of F F^T / N, zero outside the support."""
    lo, hi = mp_support(delta)
    rho = np.asarray(rho, dtype=float)
    inside = (rho > lo) & (rho < hi)
    out = np.zeros_like(rho)
    r = rho[inside]
    out[inside] = np.sqrt((hi - r) * (r - lo)) / (2.0 * np.pi * delta * r)
    return out


@dataclass
class SpectralGrid:
    """Binned spectrum of F F^T / N.

    p_bin is the eigenvalue mass per bin and rho_bin its representative value.
    Empirical grids also keep the eigenvectors (orthonormal columns) and the
    bin of every eigenvalue.
    """
    mode: str
    edges: np.ndarray
    p_bin: np.ndarray
    rho_bin: np.ndarray
    delta: float
    eigvals: Optional[np.ndarray] = field(default=None, repr=False)
    eigvecs: Optional[np.ndarray] = field(default=None, repr=False)
    bin_index: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_bins(self) -> int:
        return len(self.p_bin)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)


def _empirical_grid(state: NetworkState, n_bins: int) -> SpectralGrid:
    F = state.F
    D, N = F.shape
    try:
        eigvals, eigvecs = np.linalg.eigh(F @ F.T / N)
    except np.linalg.LinAlgError as e:
        raise GridMismatchError(f"Eigendecomposition of F F^T / N failed: {e}") from e
    eigvals = np.maximum(eigvals, 0.0)
    lo, hi = float(eigvals[0]), float(eigvals[-1])
    if hi - lo < 1e-12 * max(1.0, hi):
        hi = lo + 1e-12 * max(1.0, hi)
    edges = np.linspace(lo, hi, n_bins + 1)
    index = np.clip(np.searchsorted(edges, eigvals, side="right") - 1, 0, n_bins - 1)
    counts = np.bincount(index, minlength=n_bins)
    sums = np.bincount(index, weights=eigvals, minlength=n_bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    rho_bin = np.where(counts > 0, sums / np.maximum(counts, 1), centers)
    empty = int(np.sum(counts == 0))
    if empty:
        logger.debug(f"{empty} of {n_bins} spectral bins are empty")
    return SpectralGrid(mode="empirical", edges=edges, p_bin=counts / D, rho_bin=rho_bin,
                        delta=D / N, eigvals=eigvals, eigvecs=eigvecs, bin_index=index)


def _analytic_grid(delta: float, n_bins: int) -> SpectralGrid:
    lo, hi = mp_support(delta)
    edges = np.linspace(lo, hi, n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    mass = mp_density(centers, delta) * np.diff(edges)
    p_bin = mass / mass.sum()
    rho_bin = centers
    if delta > 1.0:
        # atom at zero carries 1 - 1/delta of the mass
        atom = 1.0 - 1.0 / delta
        p_bin = np.concatenate([[atom], (1.0 - atom) * p_bin])
        rho_bin = np.concatenate([[0.0], centers])
        edges = np.concatenate([[0.0], edges])
    return SpectralGrid(mode="analytic", edges=edges, p_bin=p_bin, rho_bin=rho_bin, delta=delta)


def build_spectral_grid(state: NetworkState, mode: str = "empirical", n_bins: int = 64) -> SpectralGrid:
    if mode not in GRID_MODES:
        raise ParameterError(f"Unknown grid mode {mode!r}; expected one of {GRID_MODES}")
    if n_bins < 1:
        raise ParameterError(f"n_bins must be >= 1, got {n_bins}")
    if mode == "empirical":
        if state.F is None:
            raise GridMismatchError("Empirical grid needs the feature matrix F")
        return _empirical_grid(state, n_bins)
    return _analytic_grid(state.config.delta, n_bins)


def spectral_density_gap(grid: SpectralGrid, delta: Optional[float] = None) -> float:
    """Sup-norm between the binned density p_bin / width and the MP density at bin centers."""
    delta = grid.delta if delta is None else delta
    if delta > 1.0:
        raise ParameterError("Density gap is defined for delta <= 1 (no atom at zero)")
    centers = 0.5 * (grid.edges[:-1] + grid.edges[1:])
    binned = grid.p_bin / grid.widths
    return float(np.max(np.abs(binned - mp_density(centers, delta))))
