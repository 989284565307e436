"""Exception hierarchy shared by the library, the CLI and the dashboard."""


class SegflowError(Exception):
    """Base class for every error raised by segflow."""

    exit_code = 1


class ConfigurationError(SegflowError):
    """Invalid run configuration or invalid parameters."""

    exit_code = 2

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        self.detail = message
        location = []
        if field:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class UsageError(SegflowError):
    """An operation was called with mismatched inputs."""

    exit_code = 2


class DomainError(SegflowError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedDimensionError(DomainError, NotImplementedError):
    """The operation has no implementation for the requested dimension."""


class NumericalError(SegflowError):
    """A numerical procedure failed (solve failure, non-convergence)."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DegenerateComponentError(NumericalError):
    """A flow component vanished and cannot be renormalized."""

    def __init__(self, component, stage=None, t=None):
        self.component = component
        self.stage = stage
        self.t = t
        message = f"component {component + 1} vanished"
        if t is not None:
            message += f" at t={t:.17g}"
        if stage is not None:
            message += f" in epsilon stage {stage}"
        super().__init__(message)


class DegenerateProbeError(SegflowError):
    """H fell below the degeneracy cutoff: the field vanishes near the base."""


class InsufficientResolutionError(SegflowError):
    """Too few radii above the discretization floor to extrapolate."""


class RangeError(SegflowError):
    """A requested time, radius or window lies outside the available data."""


class NotFoundError(SegflowError):
    """A searched-for feature (e.g. a sign change) does not exist."""


class InvalidInitialDataError(DomainError):
    """Initial data is not Sigma-valued or violates the L2 constraint."""

    def __init__(self, check):
        self.check = check
        super().__init__("invalid initial data: " + "; ".join(check.violations))


class MissingArtifactError(SegflowError):
    """Trajectory artifacts required by a command are missing."""

    exit_code = 3


class NoPlateauError(SegflowError):
    """The multiplier series never settled within the run."""

    exit_code = 4
