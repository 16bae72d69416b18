import logging
from functools import cached_property
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator
from scipy import stats
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from ..constants import BLOCK_RANGES, MAX_PD_ATTEMPTS, SIGMA_FLOOR, NAMED_LAWS
from ..errors import ModelError, ParameterError, UnsupportedMomentsError

logger = logging.getLogger(__name__)

ParamValue = Union[float, List[float]]


def uniform_partition(D: int, m: int) -> List[List[int]]:
    """Consecutive blocks of size m; the last one is shorter when m does not divide D."""
    if m < 1 or D < 1:
        raise ParameterError(f"Need D >= 1 and m >= 1, got D={D}, m={m}")
    return [list(range(start, min(start + m, D))) for start in range(0, D, m)]


def _normalized_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    u = rng.random(shape)
    return u / u.sum(axis=-1, keepdims=True)


# --- Dimension-wise mixture ---

class MixtureSpec(BaseModel):
    """Per-dimension q-component Gaussian mixture; arrays are D x q."""
    q: int = Field(ge=1)
    means: List[List[float]]
    stds: List[List[float]]
    weights: List[List[float]]
    alpha: Optional[float] = None
    beta: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        mu, sd, w = self.arrays
        if mu.ndim != 2 or mu.shape[1] != self.q or sd.shape != mu.shape or w.shape != mu.shape:
            raise ValueError(f"means/stds/weights must all be D x {self.q}")
        if np.any(w < 0) or np.any(np.abs(w.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("weights must be nonnegative and sum to 1 in every dimension")
        if np.any(sd <= 0):
            raise ValueError("std-devs must be positive")
        if self.alpha is not None and (np.any(mu < -self.alpha) or np.any(mu >= self.alpha)):
            raise ValueError(f"means must lie in [-{self.alpha}, {self.alpha})")
        if self.beta is not None and np.any(sd >= self.beta):
            raise ValueError(f"std-devs must lie in (0, {self.beta})")
        return self

    @cached_property
    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (np.asarray(self.means, dtype=float), np.asarray(self.stds, dtype=float),
                np.asarray(self.weights, dtype=float))

    @property
    def D(self) -> int:
        return len(self.means)

    @classmethod
    def draw(cls, D: int, q: int, alpha: float, beta: float, seed: int) -> "MixtureSpec":
        """mu ~ U[-alpha, alpha), sigma ~ U(SIGMA_FLOOR, beta), pi normalized uniform."""
        if alpha <= 0 or beta <= SIGMA_FLOOR:
            raise ParameterError(f"Need alpha > 0 and beta > {SIGMA_FLOOR}, got alpha={alpha}, beta={beta}")
        rng = np.random.default_rng(seed)
        means = rng.uniform(-alpha, alpha, size=(D, q))
        stds = rng.uniform(SIGMA_FLOOR, beta, size=(D, q))
        weights = _normalized_uniform(rng, (D, q))
        return cls(q=q, means=means.tolist(), stds=stds.tolist(), weights=weights.tolist(), alpha=alpha, beta=beta)

    @classmethod
    def identical(cls, D: int, means, stds, weights) -> "MixtureSpec":
        """The same components in every dimension."""
        q = len(means)
        return cls(q=q, means=[list(means)] * D, stds=[list(stds)] * D, weights=[list(weights)] * D)

    def moments(self) -> Tuple[np.ndarray, np.ndarray]:
        mu, sd, w = self.arrays
        mean = np.sum(w * mu, axis=1)
        second = np.sum(w * (sd ** 2 + mu ** 2), axis=1)
        return mean, np.sqrt(second - mean ** 2)

    def sample_chunk(self, rng: np.random.Generator, rows: int, D: Optional[int] = None) -> np.ndarray:
        mu, sd, w = self.arrays
        cum = np.cumsum(w, axis=1)
        u = rng.random((rows, self.D))
        comp = np.zeros((rows, self.D), dtype=np.intp)
        for j in range(self.q - 1):
            comp += u >= cum[:, j]
        z = rng.standard_normal((rows, self.D))
        cols = np.arange(self.D)
        return mu[cols, comp] + sd[cols, comp] * z


# --- Block-dependent mixture ---

class BlockParams(BaseModel):
    """Parameters of one block: q components sharing directions u, v and coordinate stds."""
    indices: List[int]
    weights: List[float]
    levels: List[float]
    deltas: List[float]
    rhos: List[float]
    taus: List[float]
    u: List[float]
    v: List[float]
    stds: List[float]

    @model_validator(mode="after")
    def _check(self):
        s, q = len(self.indices), len(self.weights)
        if any(len(x) != q for x in (self.levels, self.deltas, self.rhos, self.taus)):
            raise ValueError("per-component lists must share the same length")
        if any(len(x) != s for x in (self.u, self.v, self.stds)):
            raise ValueError("direction and std lists must match the block size")
        w = np.asarray(self.weights)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("block weights must be nonnegative and sum to 1")
        for name in ("u", "v"):
            if abs(np.linalg.norm(getattr(self, name)) - 1.0) > 1e-12:
                raise ValueError(f"{name} must have unit norm")
        if np.any(np.asarray(self.stds) <= 0):
            raise ValueError("coordinate stds must be positive")
        return self

    @property
    def size(self) -> int:
        return len(self.indices)

    def component_mean(self, k: int) -> np.ndarray:
        return self.levels[k] * np.ones(self.size) + self.deltas[k] * np.asarray(self.u)

    def component_cov(self, k: int) -> np.ndarray:
        s = self.size
        rho, tau = self.rhos[k], self.taus[k]
        v = np.asarray(self.v)
        core = (1.0 - rho - tau) * np.eye(s) + rho * np.ones((s, s)) + tau * np.outer(v, v)
        d = np.asarray(self.stds)
        return d[:, None] * core * d[None, :]

    def factors(self, block: int) -> np.ndarray:
        """Cholesky factors, shape (q, s, s). Raises ModelError naming (block, k)."""
        out = []
        for k in range(len(self.weights)):
            try:
                out.append(np.linalg.cholesky(self.component_cov(k)))
            except np.linalg.LinAlgError:
                raise ModelError(block, k) from None
        return np.array(out)


class BlockMixtureSpec(BaseModel):
    D: int = Field(ge=1)
    m: int = Field(ge=1)
    q: int = Field(ge=1)
    blocks: List[BlockParams]

    @model_validator(mode="after")
    def _check(self):
        covered = sorted(i for blk in self.blocks for i in blk.indices)
        if covered != list(range(self.D)):
            raise ValueError("blocks must partition {0..D-1} exactly")
        if any(blk.size > self.m for blk in self.blocks):
            raise ValueError(f"block sizes must not exceed m={self.m}")
        if any(len(blk.weights) != self.q for blk in self.blocks):
            raise ValueError(f"every block needs {self.q} components")
        self.cholesky  # every component covariance must factorize
        return self

    @cached_property
    def cholesky(self) -> List[np.ndarray]:
        return [blk.factors(b) for b, blk in enumerate(self.blocks)]

    @cached_property
    def _groups(self) -> Dict[int, List[int]]:
        groups: Dict[int, List[int]] = {}
        for b, blk in enumerate(self.blocks):
            groups.setdefault(blk.size, []).append(b)
        return groups

    @classmethod
    def draw(cls, D: int, m: int, q: int, seed: int, ranges: Optional[Dict[str, float]] = None) -> "BlockMixtureSpec":
        """Random spec over uniform blocks; components that fail to factorize are redrawn."""
        ranges = {**BLOCK_RANGES, **(ranges or {})}
        rng = np.random.default_rng(seed)
        blocks, rejections = [], 0
        for b, indices in enumerate(uniform_partition(D, m)):
            for attempt in Retrying(retry=retry_if_exception_type(ModelError),
                                    stop=stop_after_attempt(MAX_PD_ATTEMPTS), reraise=True):
                with attempt:
                    block = _draw_block(rng, b, indices, q, ranges)
            rejections += attempt.retry_state.attempt_number - 1
            blocks.append(block)
        if rejections:
            logger.warning(f"Block mixture D={D}, m={m}: {rejections} non-PD draws rejected")
        spec = cls(D=D, m=m, q=q, blocks=blocks)
        return spec

    @classmethod
    def from_constants(cls, D: int, m: int, weights, levels, rho: float = 0.0, tau: float = 0.0,
                       delta: float = 0.0, std: float = 1.0) -> "BlockMixtureSpec":
        """Every block shares the same scalar parameters; u and v point along the first axis."""
        q = len(weights)
        blocks = []
        for indices in uniform_partition(D, m):
            s = len(indices)
            e1 = [1.0] + [0.0] * (s - 1)
            blocks.append(BlockParams(indices=indices, weights=list(weights), levels=list(levels),
                                      deltas=[delta] * q, rhos=[rho] * q, taus=[tau] * q,
                                      u=e1, v=e1, stds=[std] * s))
        return cls(D=D, m=m, q=q, blocks=blocks)

    def moments(self) -> Tuple[np.ndarray, np.ndarray]:
        mean = np.empty(self.D)
        var = np.empty(self.D)
        for blk in self.blocks:
            w = np.asarray(blk.weights)
            comp_means = np.array([blk.component_mean(k) for k in range(self.q)])  # q x s
            comp_vars = np.array([np.diag(blk.component_cov(k)) for k in range(self.q)])
            mu = w @ comp_means
            mean[blk.indices] = mu
            var[blk.indices] = w @ (comp_vars + comp_means ** 2) - mu ** 2
        return mean, np.sqrt(var)

    def sample_chunk(self, rng: np.random.Generator, rows: int, D: Optional[int] = None) -> np.ndarray:
        out = np.empty((rows, self.D))
        for size, members in sorted(self._groups.items()):
            idx = np.array([self.blocks[b].indices for b in members])  # g x s
            chol = np.array([self.cholesky[b] for b in members])  # g x q x s x s
            means = np.array([[self.blocks[b].component_mean(k) for k in range(self.q)] for b in members])
            cum = np.cumsum([self.blocks[b].weights for b in members], axis=1)  # g x q
            u = rng.random((rows, len(members)))
            comp = np.zeros((rows, len(members)), dtype=np.intp)
            for j in range(self.q - 1):
                comp += u >= cum[:, j]
            z = rng.standard_normal((rows, len(members), size))
            x = np.empty((rows, len(members), size))
            for k in range(self.q):
                xk = means[:, k][None] + np.einsum("gij,pgj->pgi", chol[:, k], z)
                mask = comp == k
                x[mask] = xk[mask]
            out[:, idx.ravel()] = x.reshape(rows, -1)
        return out


def _unit(rng: np.random.Generator, s: int) -> List[float]:
    g = rng.standard_normal(s)
    return (g / np.linalg.norm(g)).tolist()


def _draw_block(rng, b: int, indices: List[int], q: int, ranges: Dict[str, float]) -> BlockParams:
    s = len(indices)
    block = BlockParams(
        indices=indices,
        weights=_normalized_uniform(rng, q).tolist(),
        levels=rng.uniform(-ranges["alpha"], ranges["alpha"], q).tolist(),
        deltas=rng.uniform(0.0, ranges["delta_max"], q).tolist(),
        rhos=rng.uniform(ranges["rho_low"], ranges["rho_high"], q).tolist(),
        taus=rng.uniform(0.0, ranges["tau_max"], q).tolist(),
        u=_unit(rng, s),
        v=_unit(rng, s),
        stds=rng.uniform(SIGMA_FLOOR, ranges["beta"], s).tolist(),
    )
    block.factors(b)
    return block


# --- Scalar laws ---

LAW_TAGS = ("uniform", "beta", "poisson", "laplace", "pareto", "lorentz", "gaussian",
            "gaussian_mixture", "affine_proxy")


class ScalarLawSpec(BaseModel):
    """Columns i.i.d. from a named law, or the affine Gaussian proxy."""
    law: str
    params: Dict[str, ParamValue] = Field(default_factory=dict)

    @field_validator("law")
    @classmethod
    def _known_law(cls, value: str) -> str:
        if value not in LAW_TAGS:
            raise ValueError(f"unknown law tag {value!r}; expected one of {LAW_TAGS}")
        return value

    @model_validator(mode="after")
    def _check_params(self):
        p = self.params
        law = self.law
        try:
            if law == "uniform" and not p["a"] < p["b"]:
                raise ValueError("uniform needs a < b")
            if law == "beta" and not (p["a"] > 0 and p["b"] > 0):
                raise ValueError("beta needs a, b > 0")
            if law == "poisson" and not p["lam"] > 0:
                raise ValueError("poisson needs lam > 0")
            if law in ("laplace", "gaussian") and not p["scale"] > 0:
                raise ValueError(f"{law} needs scale > 0")
            if law == "pareto" and not p["alpha"] > 0:
                raise ValueError("pareto needs alpha > 0")
            if law == "lorentz" and not p["gamma"] > 0:
                raise ValueError("lorentz needs gamma > 0")
            if law == "gaussian_mixture":
                w = np.asarray(p["weights"], dtype=float)
                if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12 or np.any(np.asarray(p["stds"]) <= 0):
                    raise ValueError("gaussian_mixture needs normalized weights and positive stds")
                if not len(p["weights"]) == len(p["means"]) == len(p["stds"]):
                    raise ValueError("gaussian_mixture lists must have equal length")
            if law == "affine_proxy" and np.any(np.asarray(p["sigma"], dtype=float) <= 0):
                raise ValueError("affine_proxy needs sigma > 0")
        except KeyError as e:
            raise ValueError(f"{law} is missing parameter {e}") from None
        return self

    def frozen(self):
        """scipy.stats frozen distribution for the single-law tags."""
        p = self.params
        law = self.law
        if law == "uniform":
            return stats.uniform(loc=p["a"], scale=p["b"] - p["a"])
        if law == "beta":
            return stats.beta(p["a"], p["b"])
        if law == "poisson":
            return stats.poisson(p["lam"])
        if law == "laplace":
            return stats.laplace(loc=p["loc"], scale=p["scale"])
        if law == "pareto":
            return stats.pareto(p["alpha"])
        if law == "lorentz":
            return stats.cauchy(loc=p.get("x0", 0.0), scale=p["gamma"])
        if law == "gaussian":
            return stats.norm(loc=p["loc"], scale=p["scale"])
        raise ParameterError(f"{law} has no single frozen distribution")

    def moments(self, D: int) -> Tuple[np.ndarray, np.ndarray]:
        p = self.params
        if self.law == "lorentz":
            raise UnsupportedMomentsError("lorentz has no finite moments; use empirical standardization")
        if self.law == "gaussian_mixture":
            w, mu, sd = (np.asarray(p[k], dtype=float) for k in ("weights", "means", "stds"))
            mean = float(w @ mu)
            std = float(np.sqrt(w @ (sd ** 2 + mu ** 2) - mean ** 2))
        elif self.law == "affine_proxy":
            return (np.broadcast_to(np.asarray(p["mu"], dtype=float), (D,)).copy(),
                    np.broadcast_to(np.asarray(p["sigma"], dtype=float), (D,)).copy())
        else:
            mean, var = (float(x) for x in self.frozen().stats(moments="mv"))
            if not (np.isfinite(mean) and np.isfinite(var)):
                raise UnsupportedMomentsError(f"{self.law} with {p} has no finite variance")
            std = float(np.sqrt(var))
        return np.full(D, mean), np.full(D, std)

    def sample_chunk(self, rng: np.random.Generator, rows: int, D: int) -> np.ndarray:
        p = self.params
        if self.law == "gaussian_mixture":
            w, mu, sd = (np.asarray(p[k], dtype=float) for k in ("weights", "means", "stds"))
            comp = rng.choice(len(w), size=(rows, D), p=w)
            return mu[comp] + sd[comp] * rng.standard_normal((rows, D))
        if self.law == "affine_proxy":
            mu = np.broadcast_to(np.asarray(p["mu"], dtype=float), (D,))
            sigma = np.broadcast_to(np.asarray(p["sigma"], dtype=float), (D,))
            return mu + sigma * rng.standard_normal((rows, D))
        return np.asarray(self.frozen().rvs(size=(rows, D), random_state=rng), dtype=float)


def named_law(name: str, seed: int = 0) -> ScalarLawSpec:
    """Parameter sets of the named laws; the Gaussian-mixture components are drawn once from `seed`."""
    if name not in NAMED_LAWS:
        raise ParameterError(f"Unknown law {name!r}; known: {sorted(NAMED_LAWS)}")
    entry = NAMED_LAWS[name]
    params = dict(entry["params"])
    if entry["law"] == "gaussian_mixture":
        rng = np.random.default_rng(seed)
        weights = [params.pop("w0"), params.pop("w1")]
        means = rng.uniform(params.pop("mu_low"), params.pop("mu_high"), len(weights))
        stds = rng.uniform(params.pop("sigma_low"), params.pop("sigma_high"), len(weights))
        params = {"weights": weights, "means": means.tolist(), "stds": stds.tolist()}
    return ScalarLawSpec(law=entry["law"], params=params)


def affine_proxy_of(spec: Union[MixtureSpec, BlockMixtureSpec]) -> ScalarLawSpec:
    """Gaussian with the source spec's per-dimension mean and std-dev."""
    mean, std = spec.moments()
    return ScalarLawSpec(law="affine_proxy", params={"mu": mean.tolist(), "sigma": std.tolist()})
