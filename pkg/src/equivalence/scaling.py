import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..errors import ParameterError

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 4


@dataclass
class ScalingFit:
    x: np.ndarray
    y: np.ndarray
    slope: float
    intercept: float
    r2: float
    fit_range: Tuple[float, float]
    slope_stderr: float

    def summary(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "fit_range": list(self.fit_range),
            "slope_stderr": self.slope_stderr,
            "n_points": int(len(self.x)),
        }


def fit_scaling(points: Sequence[Tuple[float, float]],
                fit_range: Optional[Tuple[float, float]] = None) -> ScalingFit:
    """Least squares of log y on log x over the points with x in fit_range (inclusive)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    if fit_range is None:
        fit_range = (float(x.min()), float(x.max())) if len(x) else (0.0, 0.0)
    lo, hi = fit_range
    mask = (x >= lo * (1 - 1e-12)) & (x <= hi * (1 + 1e-12))
    x, y = x[mask], y[mask]
    if len(x) < MIN_FIT_POINTS:
        raise ParameterError(f"Need at least {MIN_FIT_POINTS} points in {fit_range}, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ParameterError("Log-log fit needs strictly positive x and y")
    result = stats.linregress(np.log(x), np.log(y))
    return ScalingFit(x=x, y=y, slope=float(result.slope), intercept=float(result.intercept),
                      r2=float(result.rvalue ** 2), fit_range=(float(lo), float(hi)),
                      slope_stderr=float(result.stderr))


def berry_esseen_constant(ks_values, third_moment_sums) -> float:
    """Smallest C_fit with d_KS <= C_fit * sum_b E|Z_b|^3 across all points."""
    ks = np.asarray(ks_values, dtype=float)
    third = np.asarray(third_moment_sums, dtype=float)
    if ks.shape != third.shape or ks.size == 0:
        raise ParameterError("KS values and third-moment sums must be nonempty and aligned")
    if np.any(third <= 0):
        raise ParameterError("Third-moment sums must be positive")
    return float(np.max(ks / third))


def collapse_gap(curve_a: Mapping[float, float], curve_b: Mapping[float, float]) -> float:
    """Max over shared x of |y_a - y_b| / ((|y_a| + |y_b|) / 2)."""
    shared = sorted(set(curve_a) & set(curve_b))
    if not shared:
        raise ParameterError("Curves share no x values")
    ya = np.array([curve_a[x] for x in shared], dtype=float)
    yb = np.array([curve_b[x] for x in shared], dtype=float)
    scale = 0.5 * (np.abs(ya) + np.abs(yb))
    gaps = np.where(scale > 0, np.abs(ya - yb) / np.where(scale > 0, scale, 1.0), 0.0)
    return float(gaps.max())


def rank_trend(x, y) -> float:
    """Spearman rank correlation of y against x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3 or len(x) != len(y):
        raise ParameterError("Rank trend needs at least 3 aligned points")
    return float(stats.spearmanr(x, y).correlation)
