import logging
from typing import Union

import numpy as np
from scipy import integrate, stats
from scipy.special import ndtr, ndtri

from ..errors import ParameterError
from ..distributions.specs import MixtureSpec, ScalarLawSpec

logger = logging.getLogger(__name__)

MIN_SAMPLES = 1000
SQRT_2PI = np.sqrt(2.0 * np.pi)


def _phi_antiderivative(x):
    """A(x) = x Phi(x) + phi(x), so A' = Phi and A(-inf) = 0."""
    x = np.asarray(x, dtype=float)
    return x * ndtr(x) + np.exp(-0.5 * x * x) / SQRT_2PI


def _samples(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ParameterError("Empty sample")
    if x.size < MIN_SAMPLES:
        logger.warning(f"Only {x.size} samples; distances below {MIN_SAMPLES} samples are noisy")
    return np.sort(x)


def _w1_samples(x) -> float:
    """Exact integral of |F_n - Phi| for the empirical CDF F_n."""
    x = _samples(x)
    n = len(x)
    A = _phi_antiderivative
    left = A(x[0])  # F_n = 0 below the smallest sample
    right = A(-x[-1])  # integral of 1 - Phi above the largest sample
    a, b = x[:-1], x[1:]
    c = np.arange(1, n) / n
    z = np.clip(ndtri(c), a, b)
    # Phi <= c on [a, z], Phi >= c on [z, b]
    middle = (c * (z - a) - (A(z) - A(a))) + ((A(b) - A(z)) - c * (b - z))
    return float(left + right + middle.sum())


def _mixture_parts(spec, dim: int):
    if isinstance(spec, MixtureSpec):
        mu, sd, w = spec.arrays
        return w[dim], mu[dim], sd[dim]
    p = spec.params
    if spec.law == "gaussian_mixture":
        return (np.asarray(p["weights"], dtype=float), np.asarray(p["means"], dtype=float),
                np.asarray(p["stds"], dtype=float))
    if spec.law == "affine_proxy":
        mu = np.atleast_1d(np.asarray(p["mu"], dtype=float))
        sigma = np.atleast_1d(np.asarray(p["sigma"], dtype=float))
        return np.ones(1), mu[[dim % len(mu)]], sigma[[dim % len(sigma)]]
    return None


def _w1_law(spec, dim: int) -> float:
    parts = _mixture_parts(spec, dim)
    if parts is not None:
        w, mu, sd = parts

        def cdf(x):
            return float(np.dot(w, ndtr((x - mu) / sd)))

        points = sorted(set(np.round(np.concatenate([[0.0], mu]), 12)))
    else:
        law = spec.frozen()
        cdf = law.cdf
        points = sorted({0.0, float(law.ppf(0.001)), float(law.ppf(0.999))})

    def gap(x):
        return abs(cdf(x) - ndtr(x))

    edges = [-np.inf, *points, np.inf]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        value, _ = integrate.quad(gap, lo, hi, limit=200, epsabs=1e-10, epsrel=1e-10)
        total += value
    return float(total)


def wasserstein1_to_normal(data: Union[np.ndarray, MixtureSpec, ScalarLawSpec], dim: int = 0) -> float:
    """W1 between a 1-d law and N(0, 1), as the integral of |F - Phi|.

    `data` is either a sample or a spec; for a MixtureSpec, `dim` selects the dimension.
    """
    if isinstance(data, (MixtureSpec, ScalarLawSpec)):
        return _w1_law(data, dim)
    return _w1_samples(data)


def ks_to_normal(samples) -> float:
    """Two-sided one-sample Kolmogorov-Smirnov distance to N(0, 1)."""
    x = _samples(samples)
    return float(stats.kstest(x, "norm").statistic)
