import itertools
import logging
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.hermite import hermgauss

from ..constants import I4_TOLERANCE
from ..errors import ParameterError
from .covariance import floor_psd, psd_sqrt
from .nonlinearities import get_nonlinearity
from .relu_forms import relu_i2, relu_i3, relu_i4

logger = logging.getLogger(__name__)

# Tensor-product Gauss-Hermite order per dimension for the quadrature fallback
QUADRATURE_ORDER_BY_DIM = {1: 64, 2: 48, 3: 32, 4: 20}


def gaussian_expectation(integrand: Callable[[np.ndarray], np.ndarray], cov, order: Optional[int] = None) -> float:
    """E[integrand(x)] for x ~ N(0, cov) by tensor-product Gauss-Hermite.

    `integrand` maps an (n, p) array of points to n values.
    """
    L = psd_sqrt(cov)
    p = L.shape[0]
    order = order or QUADRATURE_ORDER_BY_DIM.get(p, 16)
    x, w = hermgauss(order)
    grid = np.array(list(itertools.product(x, repeat=p)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=p))), axis=1)
    points = np.sqrt(2.0) * grid @ L.T
    return float(np.sum(weights * integrand(points)) / np.pi ** (p / 2.0))


def i2(g_u: str, g_v: str, cov, order: Optional[int] = None) -> float:
    """E[g_u(u) g_v(v)] for zero-mean (u, v) with 2x2 covariance."""
    cov = floor_psd(cov, floor=0.0)
    if g_u == "relu" and g_v == "relu":
        return relu_i2(cov)
    if g_u == "identity" and g_v == "identity":
        return float(cov[0, 1])
    if {g_u, g_v} == {"relu", "identity"}:
        return 0.5 * float(cov[0, 1])
    fu, fv = get_nonlinearity(g_u).fn, get_nonlinearity(g_v).fn
    return gaussian_expectation(lambda x: fu(x[:, 0]) * fv(x[:, 1]), cov, order)


def i3(cov, g: str = "relu", g3: str = "relu", order: Optional[int] = None) -> float:
    """E[g'(x1) x2 g3(x3)] for zero-mean x with 3x3 covariance."""
    cov = floor_psd(cov, floor=0.0)
    if cov.shape != (3, 3):
        raise ParameterError(f"i3 expects a 3x3 covariance, got {cov.shape}")
    if g == "relu" and g3 == "relu":
        return relu_i3(cov)
    prime = get_nonlinearity(g).prime
    f3 = get_nonlinearity(g3).fn
    return gaussian_expectation(lambda x: prime(x[:, 0]) * x[:, 1] * f3(x[:, 2]), cov, order)


def i4(cov, g: str = "relu", g3: str = "relu", g4: str = "relu",
       tol: float = I4_TOLERANCE, order: Optional[int] = None) -> float:
    """E[g'(x1) g'(x2) g3(x3) g4(x4)] for zero-mean x with 4x4 covariance."""
    cov = floor_psd(cov, floor=0.0)
    if cov.shape != (4, 4):
        raise ParameterError(f"i4 expects a 4x4 covariance, got {cov.shape}")
    if g == "relu" and g3 == "relu" and g4 == "relu":
        return relu_i4(cov, tol=tol)
    prime = get_nonlinearity(g).prime
    f3, f4 = get_nonlinearity(g3).fn, get_nonlinearity(g4).fn
    return gaussian_expectation(
        lambda x: prime(x[:, 0]) * prime(x[:, 1]) * f3(x[:, 2]) * f4(x[:, 3]), cov, order)
