"""
Exception hierarchy for SARR-LOC.

Every failure raised by the core and adapters derives from SarrLocError so the CLI can map
families of errors onto exit codes (InputError/ConfigError -> 2, FitError -> 3).
"""

from typing import Optional


class SarrLocError(Exception):
    """Base class for all SARR-LOC errors."""


class DomainError(SarrLocError, ValueError):
    """Non-finite or otherwise invalid geometric input."""


class RangeError(SarrLocError, ValueError):
    """A time lies outside the span covered by an obstacle track."""


class OutOfBandError(DomainError):
    """The split-curve square-root argument is negative (point beyond the major-axis extent)."""


class ConfigError(SarrLocError, ValueError):
    """Invalid template, grid, channel or pipeline configuration."""


class InputError(SarrLocError, ValueError):
    """Empty, malformed or inconsistent input data."""


class FitError(SarrLocError, RuntimeError):
    """Grid search produced no finite loss."""


class PipelineStageError(SarrLocError):
    """A pipeline stage failed for one (anchor, tx) pair."""

    def __init__(self, stage: str, pair: Optional[str], cause: Exception):
        self.stage = stage
        self.pair = pair
        self.cause = cause
        where = f" for pair {pair}" if pair else ""
        super().__init__(f"{stage} failed{where}: {cause}")
