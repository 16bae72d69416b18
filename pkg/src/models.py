from dataclasses import dataclass, field
from typing import Optional, Dict, Any, List

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from .constants import (
    DEFAULT_DT, DEFAULT_N_BINS, DEFAULT_P_EVAL, DEFAULT_T_END, MIN_N_BINS, MIN_P_EVAL,
    SNAPSHOTS_PER_RUN, STEPS_PER_N,
)

ACTIVATIONS = ("relu", "hardtanh", "identity")
FEATURE_FUNCTIONS = ("tanh", "hardtanh", "identity")


# --- Configuration models ---

class NetworkConfig(BaseModel):
    """Dimensions and nonlinearities of the teacher/student pair."""
    N: int = Field(ge=1, description="Student input dimension")
    D: int = Field(ge=1, description="Latent dimension")
    K: int = Field(default=2, ge=1, description="Student hidden units")
    M: int = Field(default=2, ge=1, description="Teacher hidden units")
    activation: str = "relu"
    teacher_activation: str = "relu"
    feature_fn: str = "tanh"
    normalize_features: bool = False

    @field_validator("activation", "teacher_activation")
    @classmethod
    def _known_activation(cls, value: str) -> str:
        if value not in ACTIVATIONS:
            raise ValueError(f"unknown activation {value!r}, expected one of {ACTIVATIONS}")
        return value

    @field_validator("feature_fn")
    @classmethod
    def _known_feature_fn(cls, value: str) -> str:
        if value not in FEATURE_FUNCTIONS:
            raise ValueError(f"unknown feature function {value!r}, expected one of {FEATURE_FUNCTIONS}")
        return value

    @property
    def delta(self) -> float:
        return self.D / self.N


class SgdConfig(BaseModel):
    """Online SGD settings. steps/stride default to 10*N and N/20."""
    eta: float = Field(default=0.2, gt=0)
    steps: Optional[int] = Field(default=None, ge=0)
    stride: Optional[int] = Field(default=None, ge=1)
    p_eval: int = Field(default=DEFAULT_P_EVAL, ge=MIN_P_EVAL)
    sample_seed: int = 0
    eval_seed: int = 1

    def total_steps(self, N: int) -> int:
        return self.steps if self.steps is not None else STEPS_PER_N * N

    def snapshot_stride(self, N: int) -> int:
        if self.stride is not None:
            return self.stride
        return max(1, (STEPS_PER_N * N) // SNAPSHOTS_PER_RUN)


class OdeConfig(BaseModel):
    """Explicit Euler integration settings; stride counts dt steps between snapshots."""
    dt: float = Field(default=DEFAULT_DT, gt=0)
    t_end: float = Field(default=DEFAULT_T_END, ge=0)
    n_bins: int = Field(default=DEFAULT_N_BINS, ge=MIN_N_BINS)
    eta: float = Field(default=0.2, ge=0)
    stride: int = Field(default=5, ge=1)

    @model_validator(mode="after")
    def _grid_fits(self):
        if self.t_end > 0 and self.dt > self.t_end:
            raise ValueError(f"dt={self.dt} exceeds t_end={self.t_end}")
        return self

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


# --- Numerical state ---

@dataclass
class NetworkState:
    """Teacher (teacher_W, teacher_v), student (W, v) and feature matrix F."""
    config: NetworkConfig
    teacher_W: np.ndarray  # M x D
    teacher_v: np.ndarray  # M
    W: np.ndarray  # K x N
    v: np.ndarray  # K
    F: np.ndarray  # D x N

    def copy(self) -> "NetworkState":
        return NetworkState(
            config=self.config,
            teacher_W=self.teacher_W.copy(),
            teacher_v=self.teacher_v.copy(),
            W=self.W.copy(),
            v=self.v.copy(),
            F=self.F,  # never mutated
        )


@dataclass
class OrderParams:
    """Snapshot of the order parameters at normalized time t."""
    t: float
    Q: np.ndarray
    R: np.ndarray
    T: np.ndarray
    v: np.ndarray
    eps_g: float
    Omega: Optional[np.ndarray] = None
    Sigma: Optional[np.ndarray] = None
    S: Optional[np.ndarray] = field(default=None, repr=False)

    def quantity(self, tag: str) -> np.ndarray:
        """Flattened value of ε_g, Q, R, T or v."""
        if tag in ("eps_g", "epsilon", "eg"):
            return np.array([self.eps_g])
        if tag not in ("Q", "R", "T", "v"):
            raise KeyError(f"Unknown quantity tag {tag!r}")
        return np.asarray(getattr(self, tag), dtype=float).ravel()


@dataclass
class RunRecord:
    """Time series of OrderParams with provenance."""
    config: Dict[str, Any]
    seeds: Dict[str, Any]
    snapshots: List[OrderParams] = field(default_factory=list)
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([snap.t for snap in self.snapshots], dtype=float)

    def series(self, tag: str) -> np.ndarray:
        """Stacked quantity, shape (n_snapshots, n_components)."""
        return np.vstack([snap.quantity(tag) for snap in self.snapshots])
