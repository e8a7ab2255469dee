"""Exception hierarchy shared across the package."""


class DynwaveError(Exception):
    """Base class for all errors raised by dynwave."""


class DomainError(DynwaveError, ValueError):
    """Input lies outside the domain of an operation (non-finite samples, bad exponent)."""


class SingularityError(DynwaveError, ArithmeticError):
    """Evaluation too close to a pole of a resolvent-type quantity."""


class PreconditionError(DynwaveError, ValueError):
    """Initial or boundary data violate a compatibility condition."""


class NumericalError(DynwaveError, RuntimeError):
    """A numerical routine failed (non-convergence, blow-up)."""


class BlowUpError(NumericalError):
    """Time integration produced non-finite values."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


class ConfigError(DynwaveError, ValueError):
    """Invalid run configuration."""
