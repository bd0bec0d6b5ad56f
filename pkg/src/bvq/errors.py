"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so new failure modes should
subclass one of the four branches below rather than raising bare Exceptions.
"""


class BvqError(Exception):
    """Base class for all package errors."""


class ConfigError(BvqError):
    """Malformed configuration or command usage (exit code 2)."""


class PreconditionError(BvqError):
    """A required input (checkpoint, dataset, context field) is missing (exit code 3)."""


class NumericsError(BvqError):
    """Numerical failure: non-finite values, shape mismatch, divergence (exit code 4)."""


class ShapeError(NumericsError):
    """Operands with incompatible shapes."""


class StabilityError(NumericsError):
    """A solver stability condition (CFL or diffusion bound) was violated."""


class TrainingDivergedError(NumericsError):
    """Training loss became non-finite."""


class FormatError(BvqError):
    """Corrupt or inconsistent on-disk artifact."""


class InfeasibleError(BvqError):
    """Selection problem has no feasible point; carries the best achievable budget."""

    def __init__(self, message, min_quality_budget=None):
        super().__init__(message)
        self.min_quality_budget = min_quality_budget
