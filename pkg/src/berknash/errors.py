"""
Exception hierarchy for berknash.

Every error carries the process exit code the CLI maps it to:
2 for configuration/validation, 3 for numerical/solver failures, 4 for I/O.
"""

import time
from typing import Any, Dict, Optional

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class BerkNashError(Exception):
    """Base class for all errors raised by the package."""

    exit_code: int = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details or {}
        self.timestamp = time.time()


class ValidationFailure(BerkNashError):
    exit_code = EXIT_VALIDATION


class NumericalError(BerkNashError):
    exit_code = EXIT_NUMERICAL


class ConfigError(ValidationFailure):
    """Raised when a scenario document is malformed or violates the schema."""


class InvalidParams(ValidationFailure):
    """Raised when model or generator parameters violate their preconditions."""


class EmptyAttention(ValidationFailure):
    """Raised when a local mean-field agent has an empty attention set."""


class InfeasibleBudget(ValidationFailure):
    """Raised when the designer's distortion budget is not strictly positive."""


class SingularMatrix(NumericalError):
    """Raised when an LU pivot falls below the relative singularity threshold."""


class NoConvergence(NumericalError):
    """Raised when an eigenvalue iteration fails to stabilize."""


class DegenerateRegressor(NumericalError):
    """Raised when a subset average vanishes and the consistent conjecture is undefined."""


class ZeroBaselineCost(NumericalError):
    """Raised when the Nash aggregate cost is zero, leaving the relative deviation undefined."""


class Diverged(NumericalError):
    """Raised when a learning iterate blows up or turns non-finite."""


class NumericalFailure(NumericalError):
    """Raised when a numerical routine cannot establish its result."""


class OutputError(BerkNashError):
    """Raised when reading or writing an artifact fails."""

    exit_code = EXIT_IO
