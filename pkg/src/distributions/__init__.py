# Structured input ensembles and their standardization
from .specs import (
    BlockMixtureSpec, BlockParams, MixtureSpec, ScalarLawSpec, affine_proxy_of, named_law, uniform_partition,
)
from .sampling import (
    InputSpec, chunk_stream, iter_chunks, sample, sample_block_mixture, sample_dimensionwise_mixture,
    sample_scalar_law,
)
from .standardization import InputSource, StandardizationRecord, apply_standardization, standardize


def draw_mixture_spec(D: int, q: int, alpha: float, beta: float, seed: int) -> MixtureSpec:
    return MixtureSpec.draw(D, q, alpha, beta, seed)


def draw_block_mixture_spec(D: int, m: int, q: int, seed: int, ranges=None) -> BlockMixtureSpec:
    return BlockMixtureSpec.draw(D, m, q, seed, ranges)
