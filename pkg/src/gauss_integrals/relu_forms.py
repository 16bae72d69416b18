"""Closed forms for Gaussian expectations of ReLU products.

I2 and I3 reduce to bivariate orthant moments. I4 integrates the conditioning
pair (x1, x2) over the wedge {x1 > 0, x2 > 0} in whitened polar coordinates;
given the pair, E[x3^+ x4^+] is a truncated bivariate normal moment with a
closed form in terms of Owen's T function.
"""

import logging

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtr, owens_t

from ..constants import I4_MAX_REFINEMENTS, I4_TOLERANCE
from ..errors import AccuracyError
from .covariance import floor_psd

logger = logging.getLogger(__name__)

SQRT_2PI = np.sqrt(2.0 * np.pi)
_TINY = 1e-14
_NUDGE = 1e-10  # Owen's formula needs nonzero arguments
_RANK_ONE_GAP = 1e-9
R_MAX = 10.0


def _phi(x):
    return np.exp(-0.5 * np.square(x)) / SQRT_2PI


def _zphi(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    finite = np.isfinite(z)
    out[finite] = z[finite] * _phi(z[finite])
    return out


def relu_i2(cov) -> float:
    """E[x^+ y^+] for zero-mean (x, y) with covariance `cov`."""
    cov = floor_psd(cov, floor=0.0)
    s1, s2 = np.sqrt(np.diag(cov))
    if s1 < _TINY or s2 < _TINY:
        return 0.0
    r = float(np.clip(cov[0, 1] / (s1 * s2), -1.0, 1.0))
    return float(s1 * s2 * (np.sqrt(1.0 - r * r) + r * (np.pi - np.arccos(r))) / (2.0 * np.pi))


def relu_i3(cov) -> float:
    """E[1{x1>0} x2 x3^+].

    x2 is regressed on (x1, x3); the residual is independent of the orthant
    event, leaving E[x1 x3; A] and E[x3^2; A] over A = {x1>0, x3>0}.
    """
    cov = floor_psd(cov, floor=0.0)
    s1, s3 = np.sqrt(cov[0, 0]), np.sqrt(cov[2, 2])
    if s1 < _TINY or s3 < _TINY:
        return 0.0
    r = float(np.clip(cov[0, 2] / (s1 * s3), -1.0, 1.0))
    sq = np.sqrt(1.0 - r * r)
    e13 = s1 * s3 * (sq + r * (0.5 * np.pi + np.arcsin(r))) / (2.0 * np.pi)
    e33 = s3 * s3 * (0.25 + np.arcsin(r) / (2.0 * np.pi) + r * sq / (2.0 * np.pi))
    pair = np.array([[cov[0, 0], cov[0, 2]], [cov[0, 2], cov[2, 2]]])
    alpha = np.linalg.pinv(pair, rcond=1e-10) @ np.array([cov[0, 1], cov[2, 1]])
    return float(alpha[0] * e13 + alpha[1] * e33)


def bivariate_upper_orthant(h, k, r):
    """P(Z1 > h, Z2 > k) for standard normals with correlation r, |r| < 1."""
    a = -np.asarray(h, dtype=float)
    b = -np.asarray(k, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    a = np.where(a == 0.0, _NUDGE, a)
    b = np.where(b == 0.0, _NUDGE, b)
    s = np.sqrt(1.0 - r * r)
    ta = owens_t(a, (b - r * a) / (a * s))
    tb = owens_t(b, (a - r * b) / (b * s))
    beta = np.where(a * b < 0.0, 0.5, 0.0)
    return 0.5 * ndtr(a) + 0.5 * ndtr(b) - ta - tb - beta


def _relu_mean(m, s):
    z = m / s
    return m * ndtr(z) + s * _phi(z)


def _rank_one_product(m3, m4, s3, sig4):
    """E[(m3 + s3 Z)^+ (m4 + sig4 Z)^+] for a single standard normal Z."""
    lo = -m3 / s3
    if sig4 > 0:
        lo = np.maximum(lo, -m4 / sig4)
        hi = np.full_like(lo, np.inf)
    else:
        hi = -m4 / sig4
    d0 = ndtr(hi) - ndtr(lo)
    d1 = _phi(lo) - _phi(hi)
    d2 = (ndtr(hi) - _zphi(hi)) - (ndtr(lo) - _zphi(lo))
    val = m3 * m4 * d0 + (m3 * sig4 + m4 * s3) * d1 + s3 * sig4 * d2
    return np.where(lo < hi, val, 0.0)


def relu_product_mean(m3, m4, cov, std_floor: float = 1e-12):
    """E[y3^+ y4^+] for y ~ N((m3, m4), cov), vectorized over the means."""
    m3 = np.asarray(m3, dtype=float)
    m4 = np.asarray(m4, dtype=float)
    s3 = np.sqrt(max(cov[0, 0], 0.0))
    s4 = np.sqrt(max(cov[1, 1], 0.0))
    if s3 < std_floor and s4 < std_floor:
        return np.maximum(m3, 0.0) * np.maximum(m4, 0.0)
    if s3 < std_floor:
        return np.maximum(m3, 0.0) * _relu_mean(m4, s4)
    if s4 < std_floor:
        return _relu_mean(m3, s3) * np.maximum(m4, 0.0)

    r = float(np.clip(cov[0, 1] / (s3 * s4), -1.0, 1.0))
    if 1.0 - abs(r) < _RANK_ONE_GAP:
        return _rank_one_product(m3, m4, s3, np.copysign(s4, r))

    h, k = -m3 / s3, -m4 / s4
    sq = np.sqrt(1.0 - r * r)
    h_star = (h - r * k) / sq
    k_star = (k - r * h) / sq
    L = bivariate_upper_orthant(h, k, r)
    q_h, q_k = ndtr(-h_star), ndtr(-k_star)
    ph, pk = _phi(h), _phi(k)
    ez3 = ph * q_k + r * pk * q_h
    ez4 = pk * q_h + r * ph * q_k
    ez34 = r * L + r * h * ph * q_k + r * k * pk * q_h + sq * pk * _phi(h_star)
    return m3 * m4 * L + m3 * s4 * ez4 + m4 * s3 * ez3 + s3 * s4 * ez34


def _wedge(a, c):
    """Angular interval where a.e > 0 and c.e > 0, or None."""
    theta_a = np.arctan2(a[1], a[0])
    theta_c = np.arctan2(c[1], c[0])
    diff = (theta_c - theta_a + np.pi) % (2.0 * np.pi) - np.pi
    width = np.pi - abs(diff)
    if width <= 0:
        return None
    lo = max(theta_a, theta_a + diff) - 0.5 * np.pi
    return lo, lo + width


def _zero_angles(row, lo, hi):
    """Angles in (lo, hi) where row.e changes sign."""
    if np.linalg.norm(row) < _TINY:
        return []
    base = np.arctan2(row[1], row[0]) + 0.5 * np.pi
    n_min = int(np.ceil((lo - base) / np.pi))
    n_max = int(np.floor((hi - base) / np.pi))
    angles = [base + n * np.pi for n in range(n_min, n_max + 1)]
    return [t for t in angles if lo + 1e-12 < t < hi - 1e-12]


def _wedge_integral(B, cov_q, pieces, n_theta, n_r, std_floor):
    xt, wt = leggauss(n_theta)
    xr, wr = leggauss(n_r)
    r = 0.5 * R_MAX * (xr + 1.0)
    radial = 0.5 * R_MAX * wr * r * np.exp(-0.5 * r * r)
    total = 0.0
    for lo, hi in pieces:
        half = 0.5 * (hi - lo)
        theta = lo + half * (xt + 1.0)
        proj = B @ np.vstack([np.cos(theta), np.sin(theta)])
        m3 = np.outer(proj[0], r)
        m4 = np.outer(proj[1], r)
        H = relu_product_mean(m3, m4, cov_q, std_floor)
        total += (half * wt) @ H @ radial
    return total / (2.0 * np.pi)


def relu_i4(cov, tol: float = I4_TOLERANCE, max_refinements: int = I4_MAX_REFINEMENTS) -> float:
    """E[1{x1>0} 1{x2>0} x3^+ x4^+] to absolute tolerance `tol`."""
    cov = floor_psd(cov, floor=0.0)
    scale = max(1.0, float(np.max(np.diag(cov))))
    std_floor = 1e-5 * np.sqrt(scale)

    w, V = np.linalg.eigh(cov[:2, :2])
    w = np.maximum(w, 0.0)
    A = V * np.sqrt(w)
    inv_sqrt = np.where(w > 1e-10 * scale, 1.0 / np.sqrt(np.where(w > 0, w, 1.0)), 0.0)
    B = (cov[2:, :2] @ V) * inv_sqrt
    cov_q = cov[2:, 2:] - B @ B.T
    cov_q = 0.5 * (cov_q + cov_q.T)

    if np.linalg.norm(A[0]) < _TINY or np.linalg.norm(A[1]) < _TINY:
        return 0.0
    wedge = _wedge(A[0], A[1])
    if wedge is None:
        return 0.0
    lo, hi = wedge

    rows = [B[0], B[1]]
    s3, s4 = np.sqrt(max(cov_q[0, 0], 0.0)), np.sqrt(max(cov_q[1, 1], 0.0))
    if s3 >= std_floor and s4 >= std_floor:
        sign = 1.0 if cov_q[0, 1] >= 0 else -1.0
        rows.append(B[0] / s3 - B[1] / (sign * s4))
    cuts = sorted({lo, hi, *(t for row in rows for t in _zero_angles(row, lo, hi))})
    pieces = list(zip(cuts[:-1], cuts[1:]))

    n_theta, n_r = 16, 32
    estimate = _wedge_integral(B, cov_q, pieces, n_theta, n_r, std_floor)
    achieved = np.inf
    for _ in range(max_refinements):
        n_theta, n_r = 2 * n_theta, 2 * n_r
        refined = _wedge_integral(B, cov_q, pieces, n_theta, n_r, std_floor)
        achieved = abs(refined - estimate)
        estimate = refined
        if achieved <= tol:
            return float(estimate)
    raise AccuracyError(float(estimate), float(achieved), tol)
