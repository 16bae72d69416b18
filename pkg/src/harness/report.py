"""SGD-versus-ODE comparison reports.

A run is "converged" when the generalization-error gap at tau stays within
e_base + sigma_base, the mean and spread of the same gap over Gaussian-input
baseline runs.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from ..dynamics.sgd import dynamic_error, value_at
from ..errors import TimeGridError
from ..models import RunRecord

logger = logging.getLogger(__name__)

QUANTITIES = ("eps_g", "Q", "R", "v")
VERDICTS = ("converged", "diverged")


class ComparisonReport(BaseModel):
    tau: float
    errors: Dict[str, float]
    e_base: float = 0.0
    sigma_base: float = 0.0
    baseline_runs: int = 0
    max_abs_deviation: float
    eps_g_gap_grid: List[Tuple[float, float]] = Field(default_factory=list)
    verdict: str
    paths: Dict[str, str] = Field(default_factory=dict)

    @property
    def threshold(self) -> float:
        return self.e_base + self.sigma_base

    def recomputed_verdict(self) -> str:
        return verdict_for(self.errors["eps_g"], self.e_base, self.sigma_base)


def verdict_for(e_eps_g: float, e_base: float, sigma_base: float) -> str:
    return "converged" if e_eps_g <= e_base + sigma_base else "diverged"


def baseline_thresholds(baseline: Sequence[RunRecord], ode: RunRecord, tau: float) -> Tuple[float, float]:
    """(e_base, sigma_base): mean and std-dev of e_eps_g(tau) over individual baseline runs."""
    if not baseline:
        return 0.0, 0.0
    gaps = np.array([dynamic_error(rec, ode, "eps_g", tau) for rec in baseline])
    sigma = float(gaps.std(ddof=1)) if len(gaps) > 1 else 0.0
    return float(gaps.mean()), sigma


def _shared_times(a: RunRecord, b: RunRecord) -> np.ndarray:
    ta, tb = a.times, b.times
    lo, hi = max(ta[0], tb[0]), min(ta[-1], tb[-1])
    if lo > hi:
        raise TimeGridError(f"Records do not overlap in time: [{ta[0]}, {ta[-1]}] vs [{tb[0]}, {tb[-1]}]")
    return ta[(ta >= lo) & (ta <= hi)]


def eps_g_gaps(sgd: RunRecord, ode: RunRecord) -> List[Tuple[float, float]]:
    """|eps_g^SGD - eps_g^ODE| at every SGD snapshot inside the ODE time range."""
    return [(float(t), abs(float(value_at(sgd, "eps_g", t)[0] - value_at(ode, "eps_g", t)[0])))
            for t in _shared_times(sgd, ode)]


def build_report(sgd: RunRecord, ode: RunRecord, baseline: Sequence[RunRecord] = (), tau: float = 1.0,
                 paths: Optional[Dict[str, str]] = None) -> ComparisonReport:
    """Dynamic errors at tau for eps_g, Q, R and v, and the baseline verdict."""
    errors = {tag: dynamic_error(sgd, ode, tag, tau) for tag in QUANTITIES}
    e_base, sigma_base = baseline_thresholds(baseline, ode, tau)
    grid = eps_g_gaps(sgd, ode)
    verdict = verdict_for(errors["eps_g"], e_base, sigma_base)
    report = ComparisonReport(
        tau=tau, errors=errors, e_base=e_base, sigma_base=sigma_base, baseline_runs=len(baseline),
        max_abs_deviation=max(gap for _, gap in grid), eps_g_gap_grid=grid, verdict=verdict,
        paths=paths or {},
    )
    logger.info(f"e_eps_g({tau:.4g}) = {errors['eps_g']:.4e}, threshold {report.threshold:.4e} "
                f"-> {verdict}")
    return report
