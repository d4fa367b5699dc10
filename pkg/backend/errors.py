# backend/errors.py


class FracHeatError(Exception):
    """Base class for every error raised by the backend."""


class DomainError(FracHeatError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedKernel(DomainError):
    """The requested operation does not exist for this covariance family."""


class ThresholdViolation(DomainError):
    """H is at or below the existence threshold of the solution."""

    def __init__(self, hurst, threshold, condition):
        self.hurst = float(hurst)
        self.threshold = float(threshold)
        self.condition = condition
        super().__init__(
            f"existence condition {condition} violated: H={self.hurst:g} "
            f"<= threshold {self.threshold:g}"
        )


class ConvergenceError(FracHeatError):
    """A quadrature did not reach its tolerance and the caller asked for strict mode."""


class NotPositiveDefinite(FracHeatError):
    """No jitter in the schedule made the covariance matrix factorizable."""


class UsageError(FracHeatError):
    """Bad command line or config file."""


class SchemaViolation(FracHeatError):
    """An output document does not match the published JSON schema."""
