import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from ..constants import DEFAULT_QUADRATURE_ORDER, MIN_QUADRATURE_ORDER
from ..errors import ParameterError

logger = logging.getLogger(__name__)

TAIL = 12.0  # |u| beyond this carries < 1e-32 Gaussian mass


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_prime(x):
    return (np.asarray(x) > 0).astype(float)


def _hardtanh(x):
    return np.clip(x, -1.0, 1.0)


def _hardtanh_prime(x):
    x = np.asarray(x)
    return ((x > -1.0) & (x < 1.0)).astype(float)


def _identity(x):
    return np.asarray(x, dtype=float)


def _identity_prime(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _tanh_prime(x):
    return 1.0 - np.tanh(x) ** 2


@dataclass(frozen=True)
class Nonlinearity:
    tag: str
    fn: Callable[[np.ndarray], np.ndarray]
    prime: Callable[[np.ndarray], np.ndarray]
    kinks: Tuple[float, ...] = ()


NONLINEARITIES: Dict[str, Nonlinearity] = {
    "relu": Nonlinearity("relu", _relu, _relu_prime, (0.0,)),
    "hardtanh": Nonlinearity("hardtanh", _hardtanh, _hardtanh_prime, (-1.0, 1.0)),
    "identity": Nonlinearity("identity", _identity, _identity_prime),
    "tanh": Nonlinearity("tanh", np.tanh, _tanh_prime),
}


def get_nonlinearity(tag: str) -> Nonlinearity:
    try:
        return NONLINEARITIES[tag]
    except KeyError:
        raise ParameterError(f"Unknown nonlinearity tag {tag!r}; known: {sorted(NONLINEARITIES)}") from None


@dataclass(frozen=True)
class NonlinearityStats:
    """a = E[f(u)], b = E[u f(u)], c = E[f(u)^2] for u ~ N(0,1)."""
    tag: str
    a: float
    b: float
    c: float
    order: int

    @property
    def consts(self) -> Tuple[float, float, float]:
        return self.a, self.b, self.c


def expect_standard_normal(fn: Callable[[np.ndarray], np.ndarray], kinks: Sequence[float] = (),
                           order: int = DEFAULT_QUADRATURE_ORDER) -> float:
    """E[fn(u)], u ~ N(0,1).

    Gauss-Legendre against the normal density on [-TAIL, TAIL], split at the
    kinks (at the origin for smooth integrands).
    """
    edges = [-TAIL, *sorted(kinks or (0.0,)), TAIL]
    nodes, weights = leggauss(order)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        u = lo + half * (nodes + 1.0)
        total += half * np.sum(weights * fn(u) * np.exp(-0.5 * u * u))
    return float(total / np.sqrt(2.0 * np.pi))


@lru_cache(maxsize=64)
def nonlinearity_stats(tag: str, order: int = DEFAULT_QUADRATURE_ORDER) -> NonlinearityStats:
    if order < MIN_QUADRATURE_ORDER:
        raise ParameterError(f"Quadrature order must be >= {MIN_QUADRATURE_ORDER}, got {order}")
    nl = get_nonlinearity(tag)

    # Exact values where they exist
    if tag == "relu":
        return NonlinearityStats(tag, 1.0 / np.sqrt(2.0 * np.pi), 0.5, 0.5, order)
    if tag == "identity":
        return NonlinearityStats(tag, 0.0, 1.0, 1.0, order)

    a = expect_standard_normal(nl.fn, nl.kinks, order)
    b = expect_standard_normal(lambda u: u * nl.fn(u), nl.kinks, order)
    c = expect_standard_normal(lambda u: nl.fn(u) ** 2, nl.kinks, order)
    logger.debug(f"Stats for {tag} at order {order}: a={a:.3e}, b={b:.12f}, c={c:.12f}")
    return NonlinearityStats(tag, a, b, c, order)
