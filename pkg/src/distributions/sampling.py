import logging
from typing import Iterator, Optional, Union

import numpy as np

from ..constants import CHUNK_ROWS
from ..errors import ParameterError
from .specs import BlockMixtureSpec, MixtureSpec, ScalarLawSpec

logger = logging.getLogger(__name__)

InputSpec = Union[MixtureSpec, BlockMixtureSpec, ScalarLawSpec]


def spec_dimension(spec: InputSpec, D: Optional[int] = None) -> int:
    """Column count of the matrices a spec produces."""
    if isinstance(spec, (MixtureSpec, BlockMixtureSpec)):
        if D is not None and D != spec.D:
            raise ParameterError(f"Spec has D={spec.D}, caller asked for D={D}")
        return spec.D
    if isinstance(spec, ScalarLawSpec):
        if D is None or D < 1:
            raise ParameterError("Scalar-law sampling needs an explicit D >= 1")
        return D
    raise ParameterError(f"Unsupported input spec type {type(spec).__name__}")


def chunk_stream(spec: InputSpec, seed: int, D: Optional[int] = None,
                 chunk_rows: int = CHUNK_ROWS) -> Iterator[np.ndarray]:
    """Endless stream of raw chunks; chunk i is drawn from default_rng([seed, i])."""
    dim = spec_dimension(spec, D)
    i = 0
    while True:
        rng = np.random.default_rng([seed, i])
        yield spec.sample_chunk(rng, chunk_rows, dim)
        i += 1


def iter_chunks(spec: InputSpec, P: int, seed: int, D: Optional[int] = None,
                chunk_rows: int = CHUNK_ROWS) -> Iterator[np.ndarray]:
    """First P rows of chunk_stream, as chunks of at most chunk_rows rows."""
    if P < 0:
        raise ParameterError(f"P must be >= 0, got {P}")
    remaining = P
    for chunk in chunk_stream(spec, seed, D, chunk_rows):
        if remaining <= 0:
            return
        yield chunk[:remaining]
        remaining -= len(chunk)


def _collect(spec: InputSpec, P: int, seed: int, D: Optional[int]) -> np.ndarray:
    if P < 1:
        raise ParameterError(f"P must be >= 1, got {P}")
    dim = spec_dimension(spec, D)
    out = np.empty((P, dim))
    row = 0
    for chunk in iter_chunks(spec, P, seed, dim):
        out[row:row + len(chunk)] = chunk
        row += len(chunk)
    return out


def sample_dimensionwise_mixture(spec: MixtureSpec, P: int, seed: int) -> np.ndarray:
    if not isinstance(spec, MixtureSpec):
        raise ParameterError(f"Expected a MixtureSpec, got {type(spec).__name__}")
    return _collect(spec, P, seed, None)


def sample_block_mixture(spec: BlockMixtureSpec, P: int, seed: int) -> np.ndarray:
    if not isinstance(spec, BlockMixtureSpec):
        raise ParameterError(f"Expected a BlockMixtureSpec, got {type(spec).__name__}")
    return _collect(spec, P, seed, None)


def sample_scalar_law(spec: ScalarLawSpec, P: int, D: int, seed: int) -> np.ndarray:
    if not isinstance(spec, ScalarLawSpec):
        raise ParameterError(f"Expected a ScalarLawSpec, got {type(spec).__name__}")
    return _collect(spec, P, seed, D)


def sample(spec: InputSpec, P: int, seed: int, D: Optional[int] = None) -> np.ndarray:
    """Dispatch on the spec type."""
    return _collect(spec, P, seed, D)
