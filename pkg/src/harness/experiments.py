"""SGD, ODE, baseline and sweep experiments built from an ExperimentConfig."""

import concurrent.futures
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, List, Optional, Sequence

import pandas as pd

from ..distributions import (
    BlockMixtureSpec, InputSource, MixtureSpec, ScalarLawSpec, affine_proxy_of, named_law,
)
from ..distributions.matrix_io import load_matrix, load_spec
from ..dynamics.ode import run_ode
from ..dynamics.records import load_record, save_record
from ..dynamics.sgd import average_runs, run_sgd
from ..equivalence.scaling import rank_trend
from ..errors import ConfigError, UnsupportedMomentsError
from ..gauss_integrals.nonlinearities import nonlinearity_stats
from ..models import NetworkState, RunRecord
from ..network.model import init_gaussian
from ..settings import CACHE_DIR, THREADS
from .config import ExperimentConfig, InputConfig, derive_seed
from .report import QUANTITIES, ComparisonReport, baseline_thresholds, build_report, verdict_for

logger = logging.getLogger(__name__)

SWEEP_AXES = ("m", "alpha", "q", "law", "affine")
STANDARD_GAUSSIAN = ScalarLawSpec(law="gaussian", params={"loc": 0.0, "scale": 1.0})


# --- Inputs and initial state ---

def build_spec(input_cfg: InputConfig, D: int, seed: int):
    """Generative spec for the configured input kind; None for a fixed matrix without a spec."""
    kind = input_cfg.kind
    if input_cfg.spec_path:
        return load_spec(input_cfg.spec_path)
    if kind == "gaussian":
        return STANDARD_GAUSSIAN
    if kind == "mixture":
        return MixtureSpec.draw(D, input_cfg.q, input_cfg.alpha, input_cfg.beta, seed)
    if kind == "block_mixture":
        return BlockMixtureSpec.draw(D, input_cfg.m, input_cfg.q, seed)
    if kind == "law":
        return named_law(input_cfg.law, seed)
    if kind == "affine_proxy":
        source = input_cfg.model_copy(update={"kind": input_cfg.proxy_of})
        return affine_proxy_of(build_spec(source, D, seed))
    if kind == "file":
        return None
    raise ConfigError(f"Unknown input kind {kind!r}")


def build_input_source(config: ExperimentConfig, input_cfg: Optional[InputConfig] = None,
                       spec_seed: Optional[int] = None) -> InputSource:
    input_cfg = input_cfg or config.input
    seed = config.seeds.spec if spec_seed is None else spec_seed
    D = config.network.D
    spec = build_spec(input_cfg, D, seed)
    matrix = load_matrix(input_cfg.matrix_path) if input_cfg.kind == "file" else None
    source = InputSource(spec=spec, D=D, mode=input_cfg.standardize, seed=seed, matrix=matrix)
    if source.D != D:
        raise ConfigError(f"Input has dimension {source.D}, network expects D={D}")
    logger.info(f"Input source: kind={input_cfg.kind}, standardize={input_cfg.standardize}, seed={seed}")
    return source


def make_state(config: ExperimentConfig) -> NetworkState:
    return init_gaussian(config.network, config.seeds.model)


# --- Execution ---

def run_jobs(jobs: Dict[Hashable, Callable[[], object]], threads: int = THREADS) -> Dict[Hashable, object]:
    """Run callables in a thread pool; results come back in submission order.

    The first failure cancels pending jobs and is re-raised.
    """
    results = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        future_map = {executor.submit(job): key for key, job in jobs.items()}
        for future in concurrent.futures.as_completed(future_map):
            key = future_map[future]
            try:
                results[key] = future.result()
            except Exception as exc:
                logger.error(f"Job {key} failed: {exc}")
                for pending in future_map:
                    pending.cancel()
                raise
    return {key: results[key] for key in jobs}


def _sgd_job(config: ExperimentConfig, state: NetworkState, source: InputSource, seed: int, consts):
    def job() -> RunRecord:
        sgd_config = config.sgd.model_copy(update={"sample_seed": seed, "eval_seed": config.seeds.eval})
        record = run_sgd(state.copy(), source, sgd_config, consts)
        record.seeds.update({"model": config.seeds.model, "spec": source.seed})
        return record
    return job


def run_sgd_seeds(config: ExperimentConfig, state: NetworkState, source: InputSource,
                  seeds: Optional[Sequence[int]] = None, threads: int = THREADS) -> List[RunRecord]:
    """One SGD run per seed from copies of the same initial state, ordered by seed."""
    seeds = sorted(seeds if seeds is not None else config.seeds.sgd)
    consts = nonlinearity_stats(config.network.feature_fn).consts
    jobs = {seed: _sgd_job(config, state, source, seed, consts) for seed in seeds}
    return list(run_jobs(jobs, threads).values())


def run_ode_record(config: ExperimentConfig, state: NetworkState) -> RunRecord:
    record = run_ode(state, config.ode, nonlinearity_stats(config.network.feature_fn).consts)
    record.seeds = {"model": config.seeds.model}
    return record


def baseline_key(config: ExperimentConfig) -> str:
    payload = {
        "network": config.network.model_dump(mode="json"),
        "sgd": config.sgd.model_dump(mode="json"),
        "model_seed": config.seeds.model,
        "eval_seed": config.seeds.eval,
        "repeats": config.diagnostics.baseline_repeats,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


def baseline_seeds(config: ExperimentConfig) -> List[int]:
    return [derive_seed(config.seeds.model, f"baseline/{i}") for i in range(config.diagnostics.baseline_repeats)]


def run_baseline(config: ExperimentConfig, state: NetworkState, threads: int = THREADS,
                 cache_dir: Optional[str] = CACHE_DIR) -> List[RunRecord]:
    """Gaussian-input SGD repeats, cached per baseline key."""
    seeds = baseline_seeds(config)
    cache = os.path.join(cache_dir, f"baseline-{baseline_key(config)[:16]}") if cache_dir else None
    paths = [os.path.join(cache, f"run_{i:02d}.csv") for i in range(len(seeds))] if cache else []
    if paths and all(os.path.exists(p) for p in paths):
        logger.info(f"Loading {len(paths)} cached baseline runs from {cache}")
        return [load_record(p) for p in paths]

    gaussian = config.input.model_copy(update={"kind": "gaussian", "standardize": "none", "spec_path": None})
    source = build_input_source(config, gaussian)
    logger.info(f"Running {len(seeds)} Gaussian baseline runs")
    records = run_sgd_seeds(config, state, source, seeds, threads)
    for path, record in zip(paths, records):
        save_record(path, record, overwrite=True)
    return records


# --- Comparisons ---

@dataclass
class Comparison:
    sgd_runs: List[RunRecord]
    sgd_average: RunRecord
    ode: RunRecord
    baseline: List[RunRecord]
    report: ComparisonReport
    timings: Dict[str, float] = field(default_factory=dict)


def run_comparison(config: ExperimentConfig, threads: int = THREADS, with_baseline: bool = True,
                   cache_dir: Optional[str] = CACHE_DIR) -> Comparison:
    """Seed-averaged SGD on the configured inputs against the ODE from the same initial state."""
    state = make_state(config)
    timings = {}

    started = time.time()
    source = build_input_source(config)
    runs = run_sgd_seeds(config, state, source, threads=threads)
    timings["sgd"] = time.time() - started

    started = time.time()
    ode = run_ode_record(config, state)
    timings["ode"] = time.time() - started

    baseline = []
    if with_baseline:
        started = time.time()
        baseline = run_baseline(config, state, threads, cache_dir)
        timings["baseline"] = time.time() - started

    average = average_runs(runs)
    report = build_report(average, ode, baseline, config.tau)
    return Comparison(sgd_runs=runs, sgd_average=average, ode=ode, baseline=baseline, report=report,
                      timings=timings)


# --- Sweeps ---

@dataclass
class SweepPoint:
    label: str
    value: object
    input_cfg: InputConfig
    spec_seed: int


def sweep_points(config: ExperimentConfig, axis: str) -> List[SweepPoint]:
    """Input variants along one sweep axis; every point gets its own spec seed from seeds.spec."""
    base = config.input.model_copy(update={"spec_path": None, "matrix_path": None})
    diag = config.diagnostics
    master = config.seeds.spec
    if axis == "m":
        return [SweepPoint(f"m={m}", m, base.model_copy(update={"kind": "block_mixture", "m": m}),
                           derive_seed(master, f"m={m}")) for m in diag.m_values]
    if axis == "alpha":
        return [SweepPoint(f"alpha={a:g}", a, base.model_copy(update={"kind": "mixture", "alpha": a}),
                           derive_seed(master, f"alpha={a!r}/q={base.q}")) for a in diag.alpha_values]
    if axis == "q":
        return [SweepPoint(f"q={q}", q, base.model_copy(update={"kind": "mixture", "q": q}),
                           derive_seed(master, f"q={q}/alpha={base.alpha!r}")) for q in diag.q_values]
    if axis == "law":
        points = []
        for law in diag.laws:
            law_cfg = base.model_copy(update={"kind": "law", "law": law})
            if base.standardize == "analytic":
                try:
                    named_law(law).moments(1)
                except UnsupportedMomentsError:
                    logger.warning(f"{law} has no finite moments; standardizing it empirically")
                    law_cfg = law_cfg.model_copy(update={"standardize": "empirical"})
            points.append(SweepPoint(law, law, law_cfg, derive_seed(master, f"law={law}")))
        return points
    if axis == "affine":
        seed = derive_seed(master, f"affine/{base.proxy_of}")
        return [
            SweepPoint(base.proxy_of, base.proxy_of, base.model_copy(update={"kind": base.proxy_of}), seed),
            SweepPoint("affine_proxy", "affine_proxy", base.model_copy(update={"kind": "affine_proxy"}), seed),
        ]
    raise ConfigError(f"Unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


@dataclass
class SweepResult:
    axis: str
    table: pd.DataFrame
    averages: Dict[str, RunRecord]
    ode: RunRecord
    e_base: float
    sigma_base: float
    rank_correlation: Optional[float] = None


def run_sweep(config: ExperimentConfig, axis: str, threads: int = THREADS, with_baseline: bool = True,
              cache_dir: Optional[str] = CACHE_DIR) -> SweepResult:
    """SGD per sweep point against one ODE run; the ODE does not depend on the input law."""
    points = sweep_points(config, axis)
    state = make_state(config)
    consts = nonlinearity_stats(config.network.feature_fn).consts
    sources = {p.label: build_input_source(config, p.input_cfg, p.spec_seed) for p in points}
    seeds = sorted(config.seeds.sgd)

    jobs = {(p.label, seed): _sgd_job(config, state, sources[p.label], seed, consts)
            for p in points for seed in seeds}
    logger.info(f"Sweep over {axis}: {len(points)} points x {len(seeds)} seeds")
    results = run_jobs(jobs, threads)

    ode = run_ode_record(config, state)
    baseline = run_baseline(config, state, threads, cache_dir) if with_baseline else []
    e_base, sigma_base = baseline_thresholds(baseline, ode, config.tau)

    rows, averages = [], {}
    for p in points:
        avg = average_runs([results[(p.label, seed)] for seed in seeds])
        averages[p.label] = avg
        report = build_report(avg, ode, (), config.tau)
        row = {"point": p.label, axis: p.value, "spec_seed": p.spec_seed, "standardize": p.input_cfg.standardize}
        row.update({f"e_{tag}": report.errors[tag] for tag in QUANTITIES})
        row["max_abs_deviation"] = report.max_abs_deviation
        row["threshold"] = e_base + sigma_base
        row["verdict"] = verdict_for(report.errors["eps_g"], e_base, sigma_base)
        rows.append(row)
    table = pd.DataFrame(rows)

    rho = None
    if axis in ("m", "alpha", "q") and len(points) >= 3:
        rho = rank_trend(table[axis].to_numpy(dtype=float), table["e_eps_g"].to_numpy())
        logger.info(f"Spearman rank correlation of e_eps_g with {axis}: {rho:.3f}")
    return SweepResult(axis=axis, table=table, averages=averages, ode=ode, e_base=e_base,
                       sigma_base=sigma_base, rank_correlation=rho)
