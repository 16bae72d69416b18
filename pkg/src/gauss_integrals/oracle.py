import logging
from typing import Callable, Tuple

import numpy as np

from ..constants import DEFAULT_QUADRATURE_ORDER
from ..errors import ParameterError
from .covariance import floor_psd
from .nonlinearities import NonlinearityStats, expect_standard_normal, get_nonlinearity

logger = logging.getLogger(__name__)

MC_CHUNK = 1_000_000


def mc_oracle(cov, integrand: Callable[[np.ndarray], np.ndarray], samples: int, seed: int,
              chunk: int = MC_CHUNK) -> Tuple[float, float]:
    """Plain Monte Carlo estimate of E[integrand(x)], x ~ N(0, cov).

    Returns (estimate, standard error). Sampling goes through the Cholesky
    factor of the floored covariance, in chunks of `chunk` rows.
    """
    if samples < 2:
        raise ParameterError("mc_oracle needs at least 2 samples")
    cov = floor_psd(np.atleast_2d(cov))
    chol = np.linalg.cholesky(cov)
    rng = np.random.default_rng(seed)
    total, total_sq, done = 0.0, 0.0, 0
    while done < samples:
        n = min(chunk, samples - done)
        x = rng.standard_normal((n, cov.shape[0])) @ chol.T
        vals = np.asarray(integrand(x), dtype=float)
        total += vals.sum()
        total_sq += np.dot(vals, vals)
        done += n
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1)
    return float(mean), float(np.sqrt(var / samples))


def scaled_moments(stats: NonlinearityStats, variance: float) -> Tuple[float, float]:
    """(E[f(X)], E[X f(X)]) for X ~ N(0, variance)."""
    if np.isclose(variance, 1.0, rtol=0, atol=1e-15):
        return stats.a, stats.b
    nl = get_nonlinearity(stats.tag)
    s = np.sqrt(variance)
    kinks = tuple(k / s for k in nl.kinks)
    order = max(stats.order, DEFAULT_QUADRATURE_ORDER)
    mean = expect_standard_normal(lambda u: nl.fn(s * u), kinks, order)
    cross = expect_standard_normal(lambda u: s * u * nl.fn(s * u), kinks, order)
    return mean, cross


def price_stein_cross(f_stats: NonlinearityStats, g_stats: NonlinearityStats,
                      sxx: float, syy: float, sxy: float, rho: float) -> float:
    """First-order weak-correlation approximation of E[f(X) g(Y)].

    X ~ N(0, sxx), Y ~ N(0, syy), Cov(X, Y) = rho * sxy:
    h(rho) = E[f]E[g] + rho * E[X f(X)] * sxy / (sxx * syy) * E[Y g(Y)].
    """
    if sxx <= 0 or syy <= 0:
        raise ParameterError(f"Variances must be positive (sxx={sxx}, syy={syy})")
    if abs(rho) > 1:
        raise ParameterError(f"|rho| must be <= 1, got {rho}")
    ef, exf = scaled_moments(f_stats, sxx)
    eg, eyg = scaled_moments(g_stats, syy)
    return float(ef * eg + rho * exf * sxy / (sxx * syy) * eyg)
