"""Experiment configuration.

An INI document with one section per part of ExperimentConfig. Values are
validated by pydantic; comma-separated lists are split by field validators.
"""

import configparser
import hashlib
import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, get_args

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from ..constants import (
    BASELINE_REPEATS, DEFAULT_DT, DEFAULT_N_BINS, DEFAULT_P_EVAL, DEFAULT_SGD_SEEDS, DEFAULT_T_END,
    DEFAULT_TAU_STEPS, PROFILES, THIRD_MOMENT_REPLICATES,
)
from ..errors import ConfigError
from ..models import NetworkConfig, OdeConfig, SgdConfig
from ..settings import OUTPUT_DIR

logger = logging.getLogger(__name__)

InputKind = Literal["gaussian", "mixture", "block_mixture", "law", "affine_proxy", "file"]
StandardizeMode = Literal["analytic", "empirical", "none"]
INPUT_KINDS = get_args(InputKind)
STANDARDIZE_MODES = get_args(StandardizeMode)


def _split_list(value, cast):
    if value is None or isinstance(value, list):
        return value
    if isinstance(value, (int, float)):
        return [value]
    return [cast(part.strip()) for part in str(value).split(",") if part.strip()]


class InputConfig(BaseModel):
    kind: InputKind = "gaussian"
    standardize: StandardizeMode = "analytic"
    q: int = Field(default=2, ge=1)
    alpha: float = Field(default=1.0, gt=0)
    beta: float = Field(default=10.0, gt=0)
    m: int = Field(default=1, ge=1)
    law: str = "gaussian"
    proxy_of: Literal["mixture", "block_mixture"] = "mixture"
    spec_path: Optional[str] = None
    matrix_path: Optional[str] = None

    @model_validator(mode="after")
    def _file_needs_matrix(self):
        if self.kind == "file" and not self.matrix_path:
            raise ValueError("input kind 'file' needs matrix_path")
        return self


class SeedsConfig(BaseModel):
    model: int = 0
    sgd: List[int] = Field(default_factory=lambda: list(DEFAULT_SGD_SEEDS))
    eval: int = 10_000
    spec: int = 0
    reference: int = 20_000

    @field_validator("sgd", mode="before")
    @classmethod
    def _split(cls, value):
        return _split_list(value, int)

    @field_validator("sgd")
    @classmethod
    def _nonempty(cls, value):
        if not value:
            raise ValueError("at least one SGD seed is required")
        return value


class OutputConfig(BaseModel):
    directory: str = OUTPUT_DIR
    overwrite: bool = False


class DiagnosticsConfig(BaseModel):
    tau_steps: int = Field(default=DEFAULT_TAU_STEPS, ge=0)
    baseline_repeats: int = Field(default=BASELINE_REPEATS, ge=1)
    D_values: List[int] = Field(default_factory=lambda: [512, 1024])
    m_values: List[int] = Field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64])
    q_values: List[int] = Field(default_factory=lambda: [2, 4, 8, 16])
    alpha_values: List[float] = Field(default_factory=lambda: [0.1, 0.5, 1.0, 2.0, 5.0])
    laws: List[str] = Field(default_factory=lambda: ["uniform", "beta1", "beta2", "poisson", "laplace", "pareto",
                                                     "lorentz", "gaussian", "gaussian_mixture"])
    samples: int = Field(default=100_000, ge=1)
    third_moment_samples: int = Field(default=1_000, ge=1)
    third_moment_replicates: int = Field(default=THIRD_MOMENT_REPLICATES, ge=1)
    residual_triples: int = Field(default=8, ge=1)
    corr_samples: int = Field(default=10_000, ge=1)
    corr_units: int = Field(default=256, ge=1)

    @field_validator("D_values", "m_values", "q_values", mode="before")
    @classmethod
    def _split_ints(cls, value):
        return _split_list(value, int)

    @field_validator("alpha_values", mode="before")
    @classmethod
    def _split_floats(cls, value):
        return _split_list(value, float)

    @field_validator("laws", mode="before")
    @classmethod
    def _split_strs(cls, value):
        return _split_list(value, str)


class ExperimentConfig(BaseModel):
    network: NetworkConfig
    sgd: SgdConfig = Field(default_factory=SgdConfig)
    ode: OdeConfig = Field(default_factory=OdeConfig)
    input: InputConfig = Field(default_factory=InputConfig)
    seeds: SeedsConfig = Field(default_factory=SeedsConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    diagnostics: DiagnosticsConfig = Field(default_factory=DiagnosticsConfig)

    @model_validator(mode="after")
    def _shared_eta(self):
        # the ODE follows the SGD learning rate unless set separately
        if "eta" not in self.ode.model_fields_set:
            self.ode = self.ode.model_copy(update={"eta": self.sgd.eta})
        return self

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON dump, output settings excluded."""
        payload = self.model_dump(mode="json", exclude={"output"})
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()

    @property
    def tau(self) -> float:
        """Evaluation time in normalized units, tau_steps / N."""
        return self.diagnostics.tau_steps / self.network.N


def derive_seed(master: int, tag: str) -> int:
    """Independent child seed for a named sub-experiment."""
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    entropy = [master, int.from_bytes(digest[:8], "little", signed=False)]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def _network_section(section: dict) -> dict:
    section = dict(section)
    delta = section.pop("delta", None)
    if "D" not in section and delta is not None:
        if "N" not in section:
            raise ConfigError("[network] needs N when D is given through delta")
        section["D"] = int(round(float(delta) * int(section["N"])))
    return section


def config_from_sections(sections: dict) -> ExperimentConfig:
    sections = {name: dict(values) for name, values in sections.items()}
    if "network" not in sections:
        raise ConfigError("Config has no [network] section")
    sections["network"] = _network_section(sections["network"])
    unknown = set(sections) - set(ExperimentConfig.model_fields)
    if unknown:
        raise ConfigError(f"Unknown config sections: {sorted(unknown)}")
    try:
        return ExperimentConfig.model_validate(sections)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment config: {e}") from e


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep N and D upper-case
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ConfigError(f"Could not parse {path}: {e}") from e
    sections = {name: dict(parser.items(name)) for name in parser.sections()}
    config = config_from_sections(sections)
    logger.info(f"Loaded config {path} (hash {config.config_hash()[:12]})")
    return config


def profile_config(profile: str = "desk", **overrides) -> ExperimentConfig:
    if profile not in PROFILES:
        raise ConfigError(f"Unknown profile {profile!r}; known: {sorted(PROFILES)}")
    p = PROFILES[profile]
    network = {
        "N": p["N"], "delta": p["delta"], "K": p["K"], "M": p["M"], "activation": p["activation"],
        "teacher_activation": p["teacher_activation"], "feature_fn": p["feature_fn"],
    }
    sections = {"network": network, "sgd": {"eta": p["eta"]}}
    for name, values in overrides.items():
        sections.setdefault(name, {}).update(values)
    return config_from_sections(sections)


def render_template(profile: str = "full") -> str:
    """Commented INI template for a named profile."""
    if profile not in PROFILES:
        raise ConfigError(f"Unknown profile {profile!r}; known: {sorted(PROFILES)}")
    p = PROFILES[profile]
    seeds = ", ".join(str(s) for s in DEFAULT_SGD_SEEDS)
    return f"""# Experiment config ({profile} profile)
# Generated by `python -m src.run_lab gen-config --profile {profile}`

[network]
# Student input dimension N and latent dimension D = delta * N
N = {p["N"]}
delta = {p["delta"]}
# Student (K) and teacher (M) hidden units
K = {p["K"]}
M = {p["M"]}
# relu | hardtanh | identity
activation = {p["activation"]}
teacher_activation = {p["teacher_activation"]}
# Feature map f: tanh | hardtanh | identity
feature_fn = {p["feature_fn"]}
# Rescale every column of F to squared norm D
normalize_features = false

[sgd]
eta = {p["eta"]}
# Defaults: steps = 10 * N, stride = N / 20 (200 snapshots)
# steps = {10 * p["N"]}
# stride = {max(1, p["N"] // 20)}
# Held-out samples for the generalization error
p_eval = {DEFAULT_P_EVAL}

[ode]
dt = {DEFAULT_DT}
t_end = {DEFAULT_T_END}
n_bins = {DEFAULT_N_BINS}
# Euler steps between snapshots
stride = 5

[input]
# gaussian | mixture | block_mixture | law | affine_proxy | file
kind = gaussian
# analytic | empirical | none
standardize = analytic
# Dimension-wise mixture: q components, means in [-alpha, alpha), std-devs in (0, beta)
q = 2
alpha = 1.0
beta = 10.0
# Block-dependent mixture: maximum block size
m = 1
# named law for kind = law
law = gaussian
# Source spec of the affine Gaussian proxy: mixture | block_mixture
proxy_of = mixture
# spec_path = path/to/spec.json
# matrix_path = path/to/inputs.bin

[seeds]
model = 0
sgd = {seeds}
eval = 10000
spec = 0
reference = 20000

[output]
# directory = output
overwrite = false

[diagnostics]
# Evaluation time tau for dynamic errors, in raw SGD steps
tau_steps = {DEFAULT_TAU_STEPS}
baseline_repeats = {BASELINE_REPEATS}
D_values = 512, 1024
m_values = 1, 2, 4, 8, 16, 32, 64
q_values = 2, 4, 8, 16
alpha_values = 0.1, 0.5, 1.0, 2.0, 5.0
laws = uniform, beta1, beta2, poisson, laplace, pareto, lorentz, gaussian, gaussian_mixture
samples = 100000
third_moment_samples = 1000
# independent spec, input and network draws averaged per (D, m)
third_moment_replicates = {THIRD_MOMENT_REPLICATES}
residual_triples = 8
corr_samples = 10000
corr_units = 256
"""
