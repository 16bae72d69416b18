"""Exception types shared across the lab.

Each error carries the structured fields a caller needs to report or recover,
the same way a client error carries its status code next to the message.
"""

from typing import Optional, Tuple


class LabError(Exception):
    """Base class for all lab errors."""


class ParameterError(LabError):
    """Invalid spec parameters or an unknown tag."""


class ConfigError(LabError):
    """Experiment configuration could not be read or validated."""


class ModelError(LabError):
    """A block-mixture covariance failed to factorize."""

    def __init__(self, block: int, component: int, message: str = "covariance is not positive definite"):
        self.block = block
        self.component = component
        self.message = message
        super().__init__(f"Block {block}, component {component}: {message}")


class DegenerateColumnError(LabError):
    """A column has zero empirical variance and cannot be standardized."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"Zero empirical variance in columns {self.columns[:10]}")


class UnsupportedMomentsError(LabError):
    """Analytic moments requested for a law without finite moments."""


class CovarianceError(LabError):
    """Covariance matrix is not positive semidefinite."""

    def __init__(self, min_eigenvalue: float):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(f"Covariance is not PSD (smallest eigenvalue {min_eigenvalue:.3e})")


class AccuracyError(LabError):
    """Adaptive quadrature did not reach its tolerance."""

    def __init__(self, estimate: float, achieved: float, tolerance: float):
        self.estimate = estimate
        self.achieved = achieved
        self.tolerance = tolerance
        super().__init__(f"Tolerance {tolerance:.1e} not reached (achieved {achieved:.3e}, estimate {estimate!r})")


class DivergenceError(LabError):
    """Non-finite values appeared during SGD or ODE integration."""

    def __init__(self, step: Optional[int] = None, time: Optional[float] = None, detail: str = ""):
        self.step = step
        self.time = time
        where = f"step {step}" if step is not None else f"t={time}"
        super().__init__(f"Numerical divergence at {where}{': ' + detail if detail else ''}")


class InputExhaustedError(LabError):
    """An input source ran out of rows."""

    def __init__(self, consumed: int, requested: int):
        self.consumed = consumed
        self.requested = requested
        super().__init__(f"Input source exhausted after {consumed} rows ({requested} requested)")


class GridMismatchError(LabError):
    """Spectral grid does not fit the network state or the requested operation."""


class ShapeError(LabError):
    """Array shapes do not match the network configuration."""

    def __init__(self, name: str, expected: Tuple[int, ...], actual: Tuple[int, ...]):
        self.name = name
        self.expected = expected
        self.actual = actual
        super().__init__(f"{name}: expected shape {expected}, got {actual}")


class TimeGridError(LabError):
    """Run records do not share compatible time grids, or τ lies outside them."""


class ArtifactError(LabError):
    """An output artifact could not be written or already exists."""
