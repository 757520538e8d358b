"""Exception hierarchy shared across the package."""


class SabsimError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SabsimError):
    """Invalid experiment configuration or malformed input file."""


class DivergenceError(SabsimError):
    """A run produced non-finite values; carries the offending iteration."""

    def __init__(self, iteration: int, message: str = ""):
        self.iteration = iteration
        super().__init__(message or f"non-finite state at iteration {iteration}")


class InvariantViolationError(SabsimError):
    """A runtime invariant that should hold mathematically was violated."""


class GateError(SabsimError):
    """Step-size gate rejection or a non-contractive error system."""


class ConvergenceError(SabsimError):
    """An iterative inner solver failed to converge within its cap."""
