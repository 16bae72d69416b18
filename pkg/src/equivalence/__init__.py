from .blocks import (
    BlockStatistic, block_statistic, block_sums, lambda_remainder_ratio, third_moment_sum, z_variance_sum,
)
from .correlation import CorrelationDiagnostics, correlation_diagnostics, gaussian_reference
from .distances import ks_to_normal, wasserstein1_to_normal
from .residuals import Residuals, residuals, residuals_from_projections
from .scaling import ScalingFit, berry_esseen_constant, collapse_gap, fit_scaling, rank_trend
from ..distributions.specs import uniform_partition
