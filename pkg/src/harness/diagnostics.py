"""Equivalence diagnostics swept over block size m and latent dimension D.

Every sweep returns a tidy table with at least m, D, m_over_D, statistic,
stderr, and a JSON-able summary with the log-log fits. Large-P sweeps stream
input chunks and keep only the projections they need.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from ..constants import MID_RANGE_WINDOW
from ..distributions import BlockMixtureSpec, InputSource, MixtureSpec
from ..equivalence import (
    berry_esseen_constant, block_statistic, block_sums, collapse_gap, correlation_diagnostics, fit_scaling,
    ks_to_normal, lambda_remainder_ratio, rank_trend, residuals_from_projections, third_moment_sum,
    wasserstein1_to_normal, z_variance_sum,
)
from ..errors import ConfigError, ParameterError
from ..gauss_integrals.nonlinearities import nonlinearity_stats
from ..models import NetworkConfig, NetworkState
from ..network.model import init_gaussian
from ..settings import THREADS
from .config import ExperimentConfig, derive_seed
from .experiments import run_jobs

logger = logging.getLogger(__name__)

DIAGNOSTICS = ("w1", "ks-scaling", "third-moment", "residuals", "corr", "remainder")


@dataclass
class DiagnosticResult:
    name: str
    table: pd.DataFrame
    summary: Dict[str, object] = field(default_factory=dict)


# --- Shared helpers ---

def _replicate_tag(tag: str, replicate: int) -> str:
    return tag if replicate == 0 else f"{tag}/rep={replicate}"


def diagnostic_state(config: ExperimentConfig, D: int, replicate: int = 0) -> NetworkState:
    """Network with N = D and column-normalized F, seeded per D (and replicate)."""
    net = config.network
    cfg = NetworkConfig(N=D, D=D, K=net.K, M=net.M, activation=net.activation,
                        teacher_activation=net.teacher_activation, feature_fn=net.feature_fn,
                        normalize_features=True)
    return init_gaussian(cfg, derive_seed(config.seeds.model, _replicate_tag(f"diag/D={D}", replicate)))


def _grid(config: ExperimentConfig) -> List[Tuple[int, int]]:
    points = []
    for D in config.diagnostics.D_values:
        for m in config.diagnostics.m_values:
            if m > D:
                logger.debug(f"Skipping m={m} > D={D}")
                continue
            points.append((D, m))
    if not points:
        raise ConfigError("No (D, m) pair with m <= D in the diagnostics config")
    return points


def _block_source(config: ExperimentConfig, tag: str, D: int, m: int) -> Tuple[BlockMixtureSpec, InputSource]:
    seed = derive_seed(config.seeds.spec, f"{tag}/D={D}/m={m}")
    spec = BlockMixtureSpec.draw(D, m, config.input.q, seed)
    mode = config.input.standardize
    return spec, InputSource(spec=spec, D=D, mode=mode, seed=seed)


def _rows_seed(config: ExperimentConfig, tag: str, D: int, m: int) -> int:
    return derive_seed(config.seeds.eval, f"{tag}/rows/D={D}/m={m}")


def stream_rows(source: InputSource, P: int, seed: int) -> Iterator[np.ndarray]:
    """Standardized chunks totalling exactly P rows."""
    taken = 0
    for chunk in source.stream(seed):
        n = min(len(chunk), P - taken)
        yield chunk[:n]
        taken += n
        if taken == P:
            return


def _partition(spec: BlockMixtureSpec) -> List[List[int]]:
    return [blk.indices for blk in spec.blocks]


def _fits_by_D(table: pd.DataFrame, fit_range=MID_RANGE_WINDOW, quantity: Optional[str] = None) -> Dict[str, dict]:
    fits = {}
    for D, group in table.groupby("D"):
        if quantity is not None:
            group = group[group["quantity"] == quantity]
        points = list(zip(group["m_over_D"], group["statistic"]))
        try:
            fits[str(int(D))] = fit_scaling(points, fit_range).summary()
        except ParameterError as e:
            logger.warning(f"No fit for D={D}: {e}")
            fits[str(int(D))] = {"error": str(e)}
    return fits


def _collapse(table: pd.DataFrame, quantity: Optional[str] = None) -> Optional[float]:
    if quantity is not None:
        table = table[table["quantity"] == quantity]
    curves = [dict(zip(g["m_over_D"], g["statistic"])) for _, g in table.groupby("D")]
    gaps = []
    for a, b in zip(curves[:-1], curves[1:]):
        try:
            gaps.append(collapse_gap(a, b))
        except ParameterError:
            continue
    return max(gaps) if gaps else None


# --- W1 of one-dimensional mixtures ---

def w1_table(config: ExperimentConfig) -> DiagnosticResult:
    """W1 to N(0, 1) of unit-variance-component mixtures with means scaled by alpha.

    For each q the weights and the unscaled means in [-1, 1) are drawn once,
    so only alpha changes along a curve.
    """
    rows = []
    trends = {}
    for q in config.diagnostics.q_values:
        rng = np.random.default_rng(derive_seed(config.seeds.spec, f"w1/q={q}"))
        weights = rng.random(q)
        weights /= weights.sum()
        base_means = rng.uniform(-1.0, 1.0, q)
        w1s = []
        for alpha in config.diagnostics.alpha_values:
            spec = MixtureSpec.identical(1, (alpha * base_means).tolist(), [1.0] * q, weights.tolist())
            w1 = wasserstein1_to_normal(spec)
            w1s.append(w1)
            rows.append({"q": q, "alpha": alpha, "statistic": w1})
        if len(w1s) >= 3:
            trends[str(q)] = rank_trend(config.diagnostics.alpha_values, w1s)
    return DiagnosticResult("w1", pd.DataFrame(rows), {"rank_trend_by_q": trends})


# --- KS distance and Berry-Esseen scaling of U_0 ---

def _ks_point(config: ExperimentConfig, D: int, m: int) -> dict:
    spec, source = _block_source(config, "ks", D, m)
    state = diagnostic_state(config, D)
    weights = state.F[:, 0] / np.sqrt(D)
    partition = _partition(spec)
    P = config.diagnostics.samples
    totals = np.empty(P)
    abs_cubed = np.zeros(len(partition))
    row = 0
    for chunk in stream_rows(source, P, _rows_seed(config, "ks", D, m)):
        contributions = block_sums(chunk, weights, partition)
        totals[row:row + len(chunk)] = contributions.sum(axis=1)
        abs_cubed += np.sum(np.abs(contributions) ** 3, axis=0)
        row += len(chunk)
    sigma = totals.std()
    if not sigma > 0:
        raise ParameterError(f"U_0 has zero variance at D={D}, m={m}")
    ks = ks_to_normal((totals - totals.mean()) / sigma)
    third = float(abs_cubed.sum() / P / sigma ** 3)
    logger.debug(f"KS D={D} m={m}: d_KS={ks:.4e}, third={third:.4e}")
    return {"m": m, "D": D, "m_over_D": m / D, "statistic": ks,
            "stderr": float(stats.kstwobign.std() / np.sqrt(P)), "third_moment_sum": third}


def ks_scaling(config: ExperimentConfig, threads: int = THREADS) -> DiagnosticResult:
    jobs = {(D, m): (lambda D=D, m=m: _ks_point(config, D, m)) for D, m in _grid(config)}
    table = pd.DataFrame(list(run_jobs(jobs, threads).values()))
    summary = {
        "fit_range": list(MID_RANGE_WINDOW),
        "fits": _fits_by_D(table),
        "berry_esseen_constant": berry_esseen_constant(table["statistic"], table["third_moment_sum"]),
        "samples": config.diagnostics.samples,
        "noise_floor": float(stats.kstwobign.mean() / np.sqrt(config.diagnostics.samples)),
    }
    return DiagnosticResult("ks-scaling", table, summary)


# --- Blockwise third absolute moments ---

def _third_point(config: ExperimentConfig, D: int, m: int) -> dict:
    """Statistic averaged over independent spec, input and network draws."""
    P = config.diagnostics.third_moment_samples
    reps = config.diagnostics.third_moment_replicates
    thirds = np.empty(reps)
    z_sums = np.empty(reps)
    for r in range(reps):
        tag = _replicate_tag("third", r)
        spec, source = _block_source(config, tag, D, m)
        state = diagnostic_state(config, D, replicate=r)
        C = source.take(P, _rows_seed(config, tag, D, m))
        stat = block_statistic("U", state, C, _partition(spec), 0)
        thirds[r] = third_moment_sum(stat)
        z_sums[r] = z_variance_sum(stat)
    stderr = float(thirds.std(ddof=1) / np.sqrt(reps)) if reps > 1 else float("nan")
    return {"m": m, "D": D, "m_over_D": m / D, "statistic": float(thirds.mean()), "stderr": stderr,
            "z_variance_sum": float(z_sums.mean()), "replicates": reps}


def third_moment_scaling(config: ExperimentConfig, threads: int = THREADS) -> DiagnosticResult:
    jobs = {(D, m): (lambda D=D, m=m: _third_point(config, D, m)) for D, m in _grid(config)}
    table = pd.DataFrame(list(run_jobs(jobs, threads).values()))
    summary = {
        "fits": _fits_by_D(table, fit_range=None),
        "collapse_gap": _collapse(table),
        "samples": config.diagnostics.third_moment_samples,
        "replicates": config.diagnostics.third_moment_replicates,
    }
    return DiagnosticResult("third-moment", table, summary)


# --- Covariance-consistency residuals R1, R2 ---

def _residual_triples(D: int, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    triples = np.empty((n, 3), dtype=int)
    for t in range(n):
        i, j = rng.choice(D, size=2, replace=False)
        triples[t] = (i, j, rng.integers(D))
    return triples


def _residual_point(config: ExperimentConfig, D: int, m: int) -> List[dict]:
    spec, source = _block_source(config, "residuals", D, m)
    state = diagnostic_state(config, D)
    triples = _residual_triples(D, config.diagnostics.residual_triples,
                                derive_seed(config.seeds.spec, f"residuals/triples/D={D}"))
    units = np.unique(triples[:, :2])
    coords = np.unique(triples[:, 2])
    P = config.diagnostics.samples
    U = np.empty((P, len(units)))
    C_r = np.empty((P, len(coords)))
    row = 0
    for chunk in stream_rows(source, P, _rows_seed(config, "residuals", D, m)):
        n = len(chunk)
        U[row:row + n] = chunk @ state.F[:, units] / np.sqrt(D)
        C_r[row:row + n] = chunk[:, coords]
        row += n
    col = {u: c for c, u in enumerate(units)}
    coord_col = {r: c for c, r in enumerate(coords)}
    values = [residuals_from_projections(state, U[:, [col[i], col[j]]], C_r[:, coord_col[r]], i, j, r)
              for i, j, r in triples]
    rows = []
    for quantity in ("R1", "R2"):
        vals = np.array([getattr(res, quantity) for res in values])
        rows.append({"m": m, "D": D, "m_over_D": m / D, "quantity": quantity, "statistic": float(vals.mean()),
                     "stderr": float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else float("nan")})
    return rows


def residual_scaling(config: ExperimentConfig, threads: int = THREADS) -> DiagnosticResult:
    jobs = {(D, m): (lambda D=D, m=m: _residual_point(config, D, m)) for D, m in _grid(config)}
    table = pd.DataFrame([row for rows in run_jobs(jobs, threads).values() for row in rows])
    summary = {
        "fit_range": list(MID_RANGE_WINDOW),
        "fits": {q: _fits_by_D(table, quantity=q) for q in ("R1", "R2")},
        "triples": config.diagnostics.residual_triples,
        "samples": config.diagnostics.samples,
    }
    return DiagnosticResult("residuals", table, summary)


# --- Covariance distances to Gaussian inputs ---

def _corr_point(config: ExperimentConfig, D: int, m: int) -> List[dict]:
    _, source = _block_source(config, "corr", D, m)
    state = diagnostic_state(config, D)
    C = source.take(config.diagnostics.corr_samples, _rows_seed(config, "corr", D, m))
    diag = correlation_diagnostics(state, C, config.seeds.reference, max_units=config.diagnostics.corr_units)
    values = {"L_nu": diag.L_nu, "L_U": diag.L_U, "L_W": diag.L_W, "L_total": diag.total}
    return [{"m": m, "D": D, "m_over_D": m / D, "quantity": name, "statistic": value, "stderr": float("nan")}
            for name, value in values.items()]


def correlation_sweep(config: ExperimentConfig, threads: int = THREADS) -> DiagnosticResult:
    jobs = {(D, m): (lambda D=D, m=m: _corr_point(config, D, m)) for D, m in _grid(config)}
    table = pd.DataFrame([row for rows in run_jobs(jobs, threads).values() for row in rows])
    totals = table[table["quantity"] == "L_total"]
    summary = {"samples": config.diagnostics.corr_samples, "units": config.diagnostics.corr_units}
    if len(totals) >= 3:
        summary["rank_trend_m"] = rank_trend(totals["m"], totals["statistic"])
    return DiagnosticResult("corr", table, summary)


# --- Nonlinear remainder of the student preactivation ---

def _remainder_point(config: ExperimentConfig, D: int, m: int) -> dict:
    _, source = _block_source(config, "remainder", D, m)
    state = diagnostic_state(config, D)
    consts = nonlinearity_stats(state.config.feature_fn).consts
    C = source.take(config.diagnostics.third_moment_samples, _rows_seed(config, "remainder", D, m))
    ratio = lambda_remainder_ratio(state, C, 0, consts)
    return {"m": m, "D": D, "m_over_D": m / D, "statistic": ratio, "stderr": float("nan")}


def remainder_sweep(config: ExperimentConfig, threads: int = THREADS) -> DiagnosticResult:
    jobs = {(D, m): (lambda D=D, m=m: _remainder_point(config, D, m)) for D, m in _grid(config)}
    table = pd.DataFrame(list(run_jobs(jobs, threads).values()))
    summary = {"samples": config.diagnostics.third_moment_samples}
    if len(table) >= 3:
        summary["rank_trend_m_over_D"] = rank_trend(table["m_over_D"], table["statistic"])
    return DiagnosticResult("remainder", table, summary)


RUNNERS = {
    "w1": lambda config, threads: w1_table(config),
    "ks-scaling": ks_scaling,
    "third-moment": third_moment_scaling,
    "residuals": residual_scaling,
    "corr": correlation_sweep,
    "remainder": remainder_sweep,
}


def run_diagnostic(name: str, config: ExperimentConfig, threads: int = THREADS) -> DiagnosticResult:
    if name not in RUNNERS:
        raise ConfigError(f"Unknown diagnostic {name!r}; expected one of {DIAGNOSTICS}")
    logger.info(f"Running diagnostic {name}")
    return RUNNERS[name](config, threads)
