"""Order-parameter ODEs of the hidden manifold model.

The student-teacher overlaps are carried per spectral bin of F F^T / N:
r (K x M) and sigma (K x K) evolve, the teacher density t (M x M) is fixed.
Together with the Omega part and the second-layer weights v they close the
dynamics; Q and R are reassembled from them at every step.
"""

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from ..constants import DENOMINATOR_FLOOR
from ..errors import DivergenceError, GridMismatchError
from ..gauss_integrals.covariance import floor_events, floor_psd
from ..gauss_integrals.integrals import i2, i3, i4
from ..gauss_integrals.nonlinearities import nonlinearity_stats
from ..models import NetworkState, OdeConfig, OrderParams, RunRecord
from .spectral import SpectralGrid, build_spectral_grid

logger = logging.getLogger(__name__)


@dataclass
class DensityField:
    r: np.ndarray  # n_bins x K x M
    sigma: np.ndarray  # n_bins x K x K
    t: np.ndarray  # n_bins x M x M
    T_rho: np.ndarray  # sum_bins p * rho * t

    def copy(self) -> "DensityField":
        return DensityField(r=self.r.copy(), sigma=self.sigma.copy(), t=self.t, T_rho=self.T_rho)


@dataclass
class OdeState:
    fields: DensityField
    v: np.ndarray
    Omega: np.ndarray
    teacher_v: np.ndarray
    T: np.ndarray
    t: float = 0.0


@dataclass
class OdeCounters:
    regularized_denominators: int = 0
    steps: int = 0


@dataclass
class _Units:
    """Gaussian expectations over (lambda_1..lambda_K, nu_1..nu_M) for one covariance."""
    cov: np.ndarray
    K: int
    g: str
    g_teacher: str
    _cache: Dict[Tuple, float] = field(default_factory=dict)

    def fn(self, i: int) -> str:
        return self.g if i < self.K else self.g_teacher

    def _sub(self, idx) -> np.ndarray:
        return self.cov[np.ix_(idx, idx)]

    def e2(self, i: int, j: int) -> float:
        """E[h_i(x_i) h_j(x_j)]."""
        key = ("2", i, j)
        if key not in self._cache:
            self._cache[key] = i2(self.fn(i), self.fn(j), self._sub([i, j]))
        return self._cache[key]

    def e3(self, k: int, i: int, j: int) -> float:
        """E[g'(lambda_k) x_i h_j(x_j)]."""
        key = ("3", k, i, j)
        if key not in self._cache:
            self._cache[key] = i3(self._sub([k, i, j]), self.g, self.fn(j))
        return self._cache[key]

    def e4(self, k: int, l: int, i: int, j: int) -> float:
        """E[g'(lambda_k) g'(lambda_l) h_i(x_i) h_j(x_j)]."""
        key = ("4",) + tuple(sorted((k, l))) + tuple(sorted((i, j)))
        if key not in self._cache:
            self._cache[key] = i4(self._sub([k, l, i, j]), self.g, self.fn(i), self.fn(j))
        return self._cache[key]


def _joint_cov(Q, R, T) -> np.ndarray:
    return floor_psd(np.block([[Q, R], [R.T, T]]))


def init_density_fields(state: NetworkState, grid: SpectralGrid, consts=None) -> DensityField:
    """Bin-averaged products of the student and teacher weights in the eigenbasis of F F^T / N."""
    if grid.mode != "empirical" or grid.eigvecs is None:
        raise GridMismatchError("Density fields need an empirical grid with eigenvectors")
    D, N = state.config.D, state.config.N
    if grid.eigvecs.shape != (D, D) or not np.isclose(grid.delta, D / N):
        raise GridMismatchError(f"Grid built for eigvecs {grid.eigvecs.shape}, delta={grid.delta}; "
                                f"state has D={D}, delta={D / N}")
    S = state.W @ state.F.T / np.sqrt(N)
    S_spec = S @ grid.eigvecs  # (1/sqrt(D)) sum_r S_kr psi_tau(r) with ||psi_tau||^2 = D
    W_spec = state.teacher_W @ grid.eigvecs
    onehot = np.zeros((D, grid.n_bins))
    onehot[np.arange(D), grid.bin_index] = 1.0
    counts = onehot.sum(axis=0)
    scale = np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 0.0)
    r = np.einsum("kt,mt,tb->bkm", S_spec, W_spec, onehot) * scale[:, None, None]
    sigma = np.einsum("kt,lt,tb->bkl", S_spec, S_spec, onehot) * scale[:, None, None]
    t = np.einsum("mt,nt,tb->bmn", W_spec, W_spec, onehot) * scale[:, None, None]
    T_rho = np.einsum("b,bmn->mn", grid.p_bin * grid.rho_bin, t)
    return DensityField(r=r, sigma=sigma, t=t, T_rho=T_rho)


def assemble_overlaps(ode_state: OdeState, grid: SpectralGrid, consts) -> Tuple[np.ndarray, np.ndarray]:
    """(Q, R) from the Omega part and the density fields."""
    a, b, c = consts
    Sigma = np.einsum("b,bkl->kl", grid.p_bin, ode_state.fields.sigma)
    Q = (c - a * a - b * b) * ode_state.Omega + b * b * Sigma
    R = b * np.einsum("b,bkm->km", grid.p_bin, ode_state.fields.r)
    return 0.5 * (Q + Q.T), R


def assemble_eps_g(Q, R, T, v, teacher_v, g: str = "relu", g_teacher: str = "relu") -> float:
    """Analytic generalization error from the joint covariance of (lambda, nu)."""
    v = np.asarray(v, dtype=float)
    teacher_v = np.asarray(teacher_v, dtype=float)
    K = len(v)
    units = _Units(_joint_cov(np.asarray(Q), np.asarray(R), np.asarray(T)), K, g, g_teacher)
    coef = np.concatenate([v, -teacher_v])
    total = 0.0
    for i in range(len(coef)):
        for j in range(i, len(coef)):
            if coef[i] == 0.0 or coef[j] == 0.0:
                continue
            total += coef[i] * coef[j] * units.e2(i, j) * (1.0 if i == j else 2.0)
    return float(0.5 * total)


def _safe(denominator: float, counters: OdeCounters) -> float:
    if denominator < DENOMINATOR_FLOOR:
        counters.regularized_denominators += 1
        return denominator + DENOMINATOR_FLOOR
    return denominator


def _drift_matrices(units: _Units, Q, R, T, v, teacher_v, counters: OdeCounters):
    """G (K x K) and H (K x M): Gaussian-regression coefficients of the residual drift."""
    K, M = len(v), len(teacher_v)
    G = np.zeros((K, K))
    H = np.zeros((K, M))
    for k in range(K):
        for j in range(K):
            if j == k:
                continue
            det = _safe(Q[k, k] * Q[j, j] - Q[k, j] ** 2, counters)
            e_kkj = units.e3(k, k, j)
            e_kjj = units.e3(k, j, j)
            G[k, k] += v[j] * (Q[j, j] * e_kkj - Q[k, j] * e_kjj) / det
            G[k, j] = v[j] * (Q[k, k] * e_kjj - Q[k, j] * e_kkj) / det
        G[k, k] += v[k] * units.e3(k, k, k) / _safe(Q[k, k], counters)
        for n in range(M):
            det = _safe(Q[k, k] * T[n, n] - R[k, n] ** 2, counters)
            e_kkn = units.e3(k, k, K + n)
            e_knn = units.e3(k, K + n, K + n)
            G[k, k] -= teacher_v[n] * (T[n, n] * e_kkn - R[k, n] * e_knn) / det
            H[k, n] = teacher_v[n] * (Q[k, k] * e_knn - R[k, n] * e_kkn) / det
    return G, H


def _second_order(units: _Units, v, teacher_v) -> np.ndarray:
    """E4_kl = E[(y_hat - y)^2 g'(lambda_k) g'(lambda_l)]."""
    K = len(v)
    coef = np.concatenate([v, -teacher_v])
    E4 = np.zeros((K, K))
    for k in range(K):
        for l in range(k, K):
            total = 0.0
            for i in range(len(coef)):
                for j in range(i, len(coef)):
                    if coef[i] == 0.0 or coef[j] == 0.0:
                        continue
                    total += coef[i] * coef[j] * units.e4(k, l, i, j) * (1.0 if i == j else 2.0)
            E4[k, l] = E4[l, k] = total
    return E4


def ode_step(ode_state: OdeState, grid: SpectralGrid, eta: float, consts, dt: float,
             g: str = "relu", g_teacher: str = "relu", counters: Optional[OdeCounters] = None) -> OdeState:
    """One explicit Euler step of (r, sigma, Omega, v)."""
    counters = counters if counters is not None else OdeCounters()
    a, b, c = consts
    delta = grid.delta
    v, tv = ode_state.v, ode_state.teacher_v
    K, M = len(v), len(tv)
    fields = ode_state.fields

    Q, R = assemble_overlaps(ode_state, grid, consts)
    cov = _joint_cov(Q, R, ode_state.T)
    Q, R, T = cov[:K, :K], cov[:K, K:], cov[K:, K:]
    units = _Units(cov, K, g, g_teacher)

    G, H = _drift_matrices(units, Q, R, T, v, tv, counters)
    E4 = _second_order(units, v, tv)
    vvE4 = np.outer(v, v) * E4

    rho = grid.rho_bin
    d_rho = (c - a * a - b * b) * delta + b * b * rho

    d_r = -(eta / delta) * v[None, :, None] * (
        d_rho[:, None, None] * np.einsum("kj,bjm->bkm", G, fields.r)
        - b * rho[:, None, None] * np.einsum("kn,bnm->bkm", H, fields.t)
    )
    A = v[None, :, None] * (
        d_rho[:, None, None] * np.einsum("kj,bjl->bkl", G, fields.sigma)
        - b * rho[:, None, None] * np.einsum("kn,bln->bkl", H, fields.r)
    )
    noise = eta * eta * ((c - a * a - b * b) * rho + b * b * rho * rho / delta)
    d_sigma = -(eta / delta) * (A + A.transpose(0, 2, 1)) + noise[:, None, None] * vvE4[None]

    E3 = np.zeros((K, K))
    for k in range(K):
        for l in range(K):
            E3[k, l] = (sum(v[j] * units.e3(k, l, j) for j in range(K))
                        - sum(tv[n] * units.e3(k, l, K + n) for n in range(M)))
    B = v[:, None] * E3
    d_Omega = -eta * (B + B.T) + c * eta * eta * vvE4

    d_v = eta * np.array([
        sum(tv[n] * units.e2(k, K + n) for n in range(M)) - sum(v[j] * units.e2(k, j) for j in range(K))
        for k in range(K)
    ])

    r = fields.r + dt * d_r
    sigma = fields.sigma + dt * d_sigma
    sigma = 0.5 * (sigma + sigma.transpose(0, 2, 1))
    Omega = ode_state.Omega + dt * d_Omega
    Omega = 0.5 * (Omega + Omega.T)
    new_v = v + dt * d_v
    t_new = ode_state.t + dt
    for name, arr in (("r", r), ("sigma", sigma), ("Omega", Omega), ("v", new_v)):
        if not np.all(np.isfinite(arr)):
            raise DivergenceError(time=t_new, detail=f"non-finite {name}")
    counters.steps += 1
    return replace(ode_state, fields=DensityField(r=r, sigma=sigma, t=fields.t, T_rho=fields.T_rho),
                   v=new_v, Omega=Omega, t=t_new)


def initial_ode_state(state: NetworkState, grid: SpectralGrid, consts) -> OdeState:
    fields = init_density_fields(state, grid, consts)
    N, D = state.config.N, state.config.D
    Omega = state.W @ state.W.T / N
    T = state.teacher_W @ state.teacher_W.T / D
    return OdeState(fields=fields, v=state.v.copy(), Omega=0.5 * (Omega + Omega.T),
                    teacher_v=state.teacher_v.copy(), T=0.5 * (T + T.T))


def snapshot(ode_state: OdeState, grid: SpectralGrid, consts, g: str, g_teacher: str) -> OrderParams:
    Q, R = assemble_overlaps(ode_state, grid, consts)
    Sigma = np.einsum("b,bkl->kl", grid.p_bin, ode_state.fields.sigma)
    eps = assemble_eps_g(Q, R, ode_state.T, ode_state.v, ode_state.teacher_v, g, g_teacher)
    return OrderParams(t=ode_state.t, Q=Q, R=R, T=ode_state.T, v=ode_state.v.copy(), eps_g=eps,
                       Omega=ode_state.Omega.copy(), Sigma=Sigma)


def run_ode(state: NetworkState, config: OdeConfig, consts=None, grid: Optional[SpectralGrid] = None) -> RunRecord:
    """Integrate from the same NetworkState SGD starts from."""
    cfg = state.config
    consts = consts or nonlinearity_stats(cfg.feature_fn).consts
    grid = grid or build_spectral_grid(state, "empirical", config.n_bins)
    g, g_teacher = cfg.activation, cfg.teacher_activation
    started = time.time()
    floors_before = floor_events()
    counters = OdeCounters()

    ode_state = initial_ode_state(state, grid, consts)
    record = RunRecord(
        config={"network": cfg.model_dump(), "ode": config.model_dump()},
        seeds={},
        snapshots=[snapshot(ode_state, grid, consts, g, g_teacher)],
    )
    n_steps = config.n_steps
    for step in range(1, n_steps + 1):
        ode_state = ode_step(ode_state, grid, config.eta, consts, config.dt, g, g_teacher, counters)
        # t accumulated from dt drifts; pin it to the grid
        ode_state.t = step * config.dt
        if step % config.stride == 0 or step == n_steps:
            record.snapshots.append(snapshot(ode_state, grid, consts, g, g_teacher))
            logger.debug(f"ODE t={ode_state.t:.2f} eps_g={record.snapshots[-1].eps_g:.5f}")

    if counters.regularized_denominators:
        logger.warning(f"ODE regularized {counters.regularized_denominators} near-degenerate denominators")
    record.meta = {
        "grid_mode": grid.mode,
        "n_bins": grid.n_bins,
        "regularized_denominators": counters.regularized_denominators,
        "psd_floor_events": floor_events() - floors_before,
        "wall_time": time.time() - started,
    }
    logger.info(f"ODE finished {n_steps} steps to t={ode_state.t:.2f} in {record.meta['wall_time']:.1f}s, "
                f"eps_g={record.snapshots[-1].eps_g:.5f}")
    return record
