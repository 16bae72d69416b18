import logging
import threading
from dataclasses import dataclass, field
from typing import Iterator, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, model_validator

from ..constants import CHUNK_ROWS, PILOT_ROWS, PILOT_SEED_OFFSET
from ..errors import DegenerateColumnError, InputExhaustedError, ParameterError
from .sampling import InputSpec, chunk_stream, iter_chunks, spec_dimension
from .specs import ScalarLawSpec

logger = logging.getLogger(__name__)

STANDARDIZATION_MODES = ("analytic", "empirical", "none")


class StandardizationRecord(BaseModel):
    """Per-dimension centering and scaling, C̄_r = (C_r - mean_r) / std_r."""
    mean: List[float]
    std: List[float]
    mode: Literal["analytic", "empirical", "none"]

    @model_validator(mode="after")
    def _check(self):
        if len(self.mean) != len(self.std):
            raise ValueError("mean and std must have the same length")
        if not all(s > 0 for s in self.std):
            raise ValueError("every std must be positive")
        return self

    @classmethod
    def identity(cls, D: int) -> "StandardizationRecord":
        return cls(mean=[0.0] * D, std=[1.0] * D, mode="none")


def analytic_record(spec: InputSpec, D: Optional[int] = None) -> StandardizationRecord:
    dim = spec_dimension(spec, D)
    mean, std = spec.moments(dim) if isinstance(spec, ScalarLawSpec) else spec.moments()
    return StandardizationRecord(mean=np.asarray(mean, dtype=float).tolist(),
                                 std=np.asarray(std, dtype=float).tolist(), mode="analytic")


def empirical_record(C) -> StandardizationRecord:
    """Column mean and population std-dev (ddof=0)."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] < 2:
        raise ParameterError("Empirical standardization needs a 2-d matrix with at least 2 rows")
    mean = C.mean(axis=0)
    std = C.std(axis=0)
    bad = np.flatnonzero(~(std > 0))
    if bad.size:
        raise DegenerateColumnError(bad.tolist())
    return StandardizationRecord(mean=mean.tolist(), std=std.tolist(), mode="empirical")


def apply_standardization(C, record: StandardizationRecord) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    if C.shape[-1] != len(record.mean):
        raise ParameterError(f"Record covers {len(record.mean)} columns, matrix has {C.shape[-1]}")
    if record.mode == "none":
        return C
    return (C - np.asarray(record.mean)) / np.asarray(record.std)


def standardize(C, mode: str = "empirical", spec: Optional[InputSpec] = None
                ) -> Tuple[np.ndarray, StandardizationRecord]:
    C = np.asarray(C, dtype=float)
    if mode == "empirical":
        record = empirical_record(C)
    elif mode == "analytic":
        if spec is None:
            raise ParameterError("Analytic standardization needs the generating spec")
        record = analytic_record(spec, C.shape[1])
    elif mode == "none":
        record = StandardizationRecord.identity(C.shape[1])
    else:
        raise ParameterError(f"Unknown standardization mode {mode!r}; expected one of {STANDARDIZATION_MODES}")
    return apply_standardization(C, record), record


def _streamed_record(spec: InputSpec, D: int, rows: int, seed: int) -> StandardizationRecord:
    """Empirical moments accumulated chunk by chunk, shifted by the first chunk's mean."""
    shift, total, total_sq, n = None, None, None, 0
    for chunk in iter_chunks(spec, rows, seed, D):
        if shift is None:
            shift = chunk.mean(axis=0)
            total = np.zeros(D)
            total_sq = np.zeros(D)
        centered = chunk - shift
        total += centered.sum(axis=0)
        total_sq += np.einsum("ij,ij->j", centered, centered)
        n += len(chunk)
    mean_c = total / n
    var = np.maximum(total_sq / n - mean_c ** 2, 0.0)
    std = np.sqrt(var)
    bad = np.flatnonzero(~(std > 0))
    if bad.size:
        raise DegenerateColumnError(bad.tolist())
    return StandardizationRecord(mean=(shift + mean_c).tolist(), std=std.tolist(), mode="empirical")


@dataclass
class InputSource:
    """Standardized input rows for online SGD and diagnostics.

    Either a generative spec or a fixed matrix. Empirical standardization is
    fitted once on a pilot sample drawn from seed + PILOT_SEED_OFFSET, so the
    pilot never overlaps a training stream.
    """
    spec: Optional[InputSpec] = None
    D: Optional[int] = None
    mode: str = "analytic"
    seed: int = 0
    pilot_rows: int = PILOT_ROWS
    matrix: Optional[np.ndarray] = field(default=None, repr=False)
    record: Optional[StandardizationRecord] = None
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in STANDARDIZATION_MODES:
            raise ParameterError(f"Unknown standardization mode {self.mode!r}")
        if self.spec is None and self.matrix is None:
            raise ParameterError("InputSource needs a spec or a matrix")
        if self.matrix is not None:
            self.matrix = np.asarray(self.matrix, dtype=float)
            self.D = self.matrix.shape[1]
        else:
            self.D = spec_dimension(self.spec, self.D)

    def fit(self) -> StandardizationRecord:
        with self._lock:
            if self.record is None:
                self.record = self._fit()
        return self.record

    def _fit(self) -> StandardizationRecord:
        if self.mode == "none":
            return StandardizationRecord.identity(self.D)
        if self.matrix is not None:
            if self.mode == "analytic":
                if self.spec is None:
                    raise ParameterError("Analytic mode on a fixed matrix needs its spec")
                return analytic_record(self.spec, self.D)
            return empirical_record(self.matrix)
        if self.mode == "analytic":
            return analytic_record(self.spec, self.D)
        logger.info(f"Fitting empirical standardization on {self.pilot_rows} pilot rows")
        return _streamed_record(self.spec, self.D, self.pilot_rows, self.seed + PILOT_SEED_OFFSET)

    def stream(self, seed: int, chunk_rows: int = CHUNK_ROWS) -> Iterator[np.ndarray]:
        """Standardized chunks; endless for specs, a single pass for a fixed matrix."""
        record = self.fit()
        if self.matrix is not None:
            for start in range(0, len(self.matrix), chunk_rows):
                yield apply_standardization(self.matrix[start:start + chunk_rows], record)
            return
        for chunk in chunk_stream(self.spec, seed, self.D, chunk_rows):
            yield apply_standardization(chunk, record)

    def take(self, P: int, seed: int) -> np.ndarray:
        """Exactly P standardized rows, or InputExhaustedError."""
        out = np.empty((P, self.D))
        row = 0
        if P == 0:
            return out
        for chunk in self.stream(seed):
            n = min(len(chunk), P - row)
            out[row:row + n] = chunk[:n]
            row += n
            if row == P:
                return out
        raise InputExhaustedError(row, P)
