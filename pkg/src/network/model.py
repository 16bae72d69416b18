import logging
from typing import NamedTuple, Optional, Tuple

import numpy as np

from ..errors import ShapeError
from ..gauss_integrals.nonlinearities import get_nonlinearity
from ..models import NetworkConfig, NetworkState, OrderParams

logger = logging.getLogger(__name__)


class ForwardPass(NamedTuple):
    y: np.ndarray  # teacher labels, P
    y_hat: np.ndarray  # student outputs, P
    nu: np.ndarray  # teacher preactivations, P x M
    lam: np.ndarray  # student preactivations, P x K
    U: np.ndarray  # latent projections, P x N
    X: np.ndarray  # student inputs f(U), P x N


def init_gaussian(config: NetworkConfig, seed: int, normalize_F: Optional[bool] = None) -> NetworkState:
    """Every weight and every entry of F i.i.d. N(0, 1).

    With normalize_F each column of F is rescaled to squared norm D.
    """
    normalize = config.normalize_features if normalize_F is None else normalize_F
    rng = np.random.default_rng(seed)
    N, D, K, M = config.N, config.D, config.K, config.M
    teacher_W = rng.standard_normal((M, D))
    teacher_v = rng.standard_normal(M)
    W = rng.standard_normal((K, N))
    v = rng.standard_normal(K)
    F = rng.standard_normal((D, N))
    if normalize:
        F *= np.sqrt(D) / np.linalg.norm(F, axis=0)
    logger.debug(f"Initialized network N={N}, D={D}, K={K}, M={M} from seed {seed}")
    return NetworkState(config=config, teacher_W=teacher_W, teacher_v=teacher_v, W=W, v=v, F=F)


def check_shapes(state: NetworkState):
    cfg = state.config
    expected = {
        "teacher_W": (cfg.M, cfg.D),
        "teacher_v": (cfg.M,),
        "W": (cfg.K, cfg.N),
        "v": (cfg.K,),
        "F": (cfg.D, cfg.N),
    }
    for name, shape in expected.items():
        actual = np.shape(getattr(state, name))
        if actual != shape:
            raise ShapeError(name, shape, actual)


def project_inputs(state: NetworkState, C) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(U, X, nu) for latent rows C; none of them depend on the student."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    D = state.config.D
    if C.shape[1] != D:
        raise ShapeError("C", (C.shape[0], D), C.shape)
    sqrt_D = np.sqrt(D)
    U = C @ state.F / sqrt_D
    X = get_nonlinearity(state.config.feature_fn).fn(U)
    nu = C @ state.teacher_W.T / sqrt_D
    return U, X, nu


def outputs(state: NetworkState, X, nu) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(y, y_hat, lam) given student inputs X and teacher preactivations nu."""
    cfg = state.config
    lam = X @ state.W.T / np.sqrt(cfg.N)
    y = get_nonlinearity(cfg.teacher_activation).fn(nu) @ state.teacher_v
    y_hat = get_nonlinearity(cfg.activation).fn(lam) @ state.v
    return y, y_hat, lam


def forward(state: NetworkState, C) -> ForwardPass:
    U, X, nu = project_inputs(state, C)
    y, y_hat, lam = outputs(state, X, nu)
    return ForwardPass(y=y, y_hat=y_hat, nu=nu, lam=lam, U=U, X=X)


def _sym(A):
    return 0.5 * (A + A.T)


def centered_preactivations(state: NetworkState, lam, a: float) -> np.ndarray:
    """λ̄_k = λ_k - a * sum_i W_ki / sqrt(N)."""
    return np.asarray(lam) - a * state.W.sum(axis=1) / np.sqrt(state.config.N)


def measure_order_params(state: NetworkState, consts: Tuple[float, float, float], t: float = 0.0,
                         eps_g: float = float("nan"), keep_S: bool = True) -> OrderParams:
    """Weight-space order parameters of the current state.

    S = W F^T / sqrt(N), Omega = W W^T / N, Sigma = S S^T / D,
    Q = (c - a^2 - b^2) Omega + b^2 Sigma, R = (b / D) S W~^T, T = W~ W~^T / D.
    """
    a, b, c = consts
    N, D = state.config.N, state.config.D
    S = state.W @ state.F.T / np.sqrt(N)
    Omega = state.W @ state.W.T / N
    Sigma = S @ S.T / D
    Q = (c - a * a - b * b) * Omega + b * b * Sigma
    R = (b / D) * S @ state.teacher_W.T
    T = state.teacher_W @ state.teacher_W.T / D
    return OrderParams(
        t=t, Q=_sym(Q), R=R, T=_sym(T), v=state.v.copy(), eps_g=eps_g,
        Omega=_sym(Omega), Sigma=_sym(Sigma), S=S if keep_S else None,
    )
