import logging
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DivergenceError, InputExhaustedError, ParameterError, TimeGridError
from ..gauss_integrals.nonlinearities import get_nonlinearity, nonlinearity_stats
from ..models import NetworkState, OrderParams, RunRecord, SgdConfig
from ..network.model import check_shapes, measure_order_params, outputs, project_inputs

logger = logging.getLogger(__name__)


def _update(state: NetworkState, x: np.ndarray, nu: np.ndarray, eta: float, step: int) -> float:
    """One simultaneous update of (W, v) from student input x and teacher preactivations nu."""
    cfg = state.config
    g = get_nonlinearity(cfg.activation)
    N = cfg.N
    lam = state.W @ x / np.sqrt(N)
    y = get_nonlinearity(cfg.teacher_activation).fn(nu) @ state.teacher_v
    g_lam = g.fn(lam)
    residual = g_lam @ state.v - y
    if not np.isfinite(residual):
        raise DivergenceError(step=step, detail=f"residual={residual}")
    grad_rows = state.v * residual * g.prime(lam)  # uses pre-update v
    state.W -= (eta / np.sqrt(N)) * np.outer(grad_rows, x)
    state.v -= (eta / N) * g_lam * residual
    return 0.5 * float(residual * residual)


def sgd_step(state: NetworkState, sample, eta: float, step: int = 0) -> float:
    """Online update on a single standardized latent row; returns the pre-update loss."""
    if eta < 0:
        raise ParameterError(f"Learning rate must be >= 0, got {eta}")
    _, X, nu = project_inputs(state, sample)
    return _update(state, X[0], nu[0], eta, step)


def evaluation_set(state: NetworkState, C_eval) -> Tuple[np.ndarray, np.ndarray]:
    """(X_eval, y_eval); both are fixed for the whole run."""
    _, X, nu = project_inputs(state, C_eval)
    y, _, _ = outputs(state, X, nu)
    return X, y


def estimate_eps_g(state: NetworkState, X_eval, y_eval) -> Tuple[float, float]:
    """(1/2) mean[(y_hat - y)^2] and its standard error."""
    lam = X_eval @ state.W.T / np.sqrt(state.config.N)
    y_hat = get_nonlinearity(state.config.activation).fn(lam) @ state.v
    half_sq = 0.5 * (y_hat - y_eval) ** 2
    if not np.all(np.isfinite(half_sq)):
        raise DivergenceError(detail="non-finite generalization error")
    return float(half_sq.mean()), float(half_sq.std(ddof=1) / np.sqrt(len(half_sq)))


def run_sgd(state: NetworkState, source, config: SgdConfig,
            consts: Optional[Tuple[float, float, float]] = None) -> RunRecord:
    """Online SGD, one fresh row per step, snapshots every stride steps.

    `source` is an InputSource. The state is mutated in place.
    """
    check_shapes(state)
    N = state.config.N
    consts = consts or nonlinearity_stats(state.config.feature_fn).consts
    steps = config.total_steps(N)
    stride = config.snapshot_stride(N)
    started = time.time()

    X_eval, y_eval = evaluation_set(state, source.take(config.p_eval, config.eval_seed))

    record = RunRecord(
        config={"network": state.config.model_dump(), "sgd": config.model_dump()},
        seeds={"sample": config.sample_seed, "eval": config.eval_seed},
        meta={"steps": steps, "stride": stride, "p_eval": config.p_eval, "eps_g_stderr": []},
    )

    def snapshot(step: int):
        eps, se = estimate_eps_g(state, X_eval, y_eval)
        record.snapshots.append(measure_order_params(state, consts, t=step / N, eps_g=eps, keep_S=False))
        record.meta["eps_g_stderr"].append(se)

    snapshot(0)
    step = 0
    if steps > 0:
        for chunk in source.stream(config.sample_seed):
            _, X, nu = project_inputs(state, chunk)
            for x, nu_row in zip(X, nu):
                _update(state, x, nu_row, config.eta, step)
                step += 1
                if step % stride == 0 or step == steps:
                    snapshot(step)
                if step == steps:
                    break
            if step == steps:
                break
            logger.debug(f"SGD step {step}/{steps}")
    if step < steps:
        raise InputExhaustedError(step, steps)

    record.meta["wall_time"] = time.time() - started
    logger.info(f"SGD finished {steps} steps ({len(record.snapshots)} snapshots) "
                f"in {record.meta['wall_time']:.1f}s, eps_g={record.snapshots[-1].eps_g:.5f}")
    return record


def _mean_optional(values: Sequence[Optional[np.ndarray]]) -> Optional[np.ndarray]:
    if any(v is None for v in values):
        return None
    return np.mean(np.stack(values), axis=0)


def average_runs(records: List[RunRecord]) -> RunRecord:
    """Element-wise mean over records sharing one time grid."""
    if not records:
        raise ParameterError("average_runs needs at least one record")
    if len(records) == 1:
        return records[0]
    times = records[0].times
    for rec in records[1:]:
        if rec.times.shape != times.shape or not np.array_equal(rec.times, times):
            raise TimeGridError("Records do not share snapshot times")
    snapshots = []
    for i, t in enumerate(times):
        group = [rec.snapshots[i] for rec in records]
        snapshots.append(OrderParams(
            t=float(t),
            Q=np.mean([s.Q for s in group], axis=0),
            R=np.mean([s.R for s in group], axis=0),
            T=np.mean([s.T for s in group], axis=0),
            v=np.mean([s.v for s in group], axis=0),
            eps_g=float(np.mean([s.eps_g for s in group])),
            Omega=_mean_optional([s.Omega for s in group]),
            Sigma=_mean_optional([s.Sigma for s in group]),
        ))
    seeds = {"runs": [rec.seeds for rec in records]}
    return RunRecord(config=records[0].config, seeds=seeds, snapshots=snapshots,
                     meta={"averaged_runs": len(records)})


def value_at(record: RunRecord, tag: str, tau: float) -> np.ndarray:
    """Tagged quantity at tau, linearly interpolated between snapshots."""
    times = record.times
    if len(times) == 0 or tau < times[0] or tau > times[-1]:
        raise TimeGridError(f"tau={tau} outside the record's time range "
                            f"[{times[0] if len(times) else None}, {times[-1] if len(times) else None}]")
    series = record.series(tag)
    return np.array([np.interp(tau, times, series[:, j]) for j in range(series.shape[1])])


def dynamic_error(a: RunRecord, b: RunRecord, tag: str, tau: float) -> float:
    """Euclidean distance of the tagged quantity between two records at tau."""
    return float(np.linalg.norm(value_at(a, tag, tau) - value_at(b, tag, tau)))
