"""Exception types shared across the package.

Each class corresponds to one failure mode of the public API; callers can
catch the specific kind they care about.
"""


class InvalidArgument(ValueError):
    """An argument violates a documented precondition."""


class IncompatibleGrids(ValueError):
    """Two fields live on different grids."""


class DomainExceeded(ValueError):
    """A profile center left the safe interior of the periodic box."""


class SolverFailure(RuntimeError):
    """Nonlinear solve did not converge; carries the final residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SpectralFailure(RuntimeError):
    """No real positive eigenvalue with a decaying eigenvector was found."""


class CoercivityViolation(RuntimeError):
    """The constrained quadratic form came out non-positive."""


class TruncationError(ValueError):
    """Temporal weight has a non-negligible tail beyond the horizon."""


class NumericalBlowup(RuntimeError):
    """Field amplitude exceeded the blow-up threshold; carries the time."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class DecompositionFailure(RuntimeError):
    """Newton iteration for the geometric decomposition did not converge."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = residual_history or []


class OutOfBasin(DecompositionFailure):
    """Input field is too far from the soliton sum for decomposition."""


class ModulatedDataFailure(RuntimeError):
    """Newton on the final-data map failed to reach its target."""


class ShootingFailure(RuntimeError):
    """No candidate survived to the requested floor time."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class FitFailure(ValueError):
    """Decay-rate fit was requested on a degenerate window."""


class ConfigError(ValueError):
    """Experiment configuration violates an invariant; carries field path."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
