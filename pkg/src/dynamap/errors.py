"""Exception types shared across the package."""


class DynamapError(Exception):
    """Base class for all package-specific errors."""


class AngleSingularityError(DynamapError):
    """Rotation log requested too close to the pi singularity."""


class DegenerateInnovationError(DynamapError):
    """Innovation covariance is numerically singular."""


class SceneFormatError(DynamapError):
    """Scene or object file failed to parse."""

    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class InvalidStateError(DynamapError):
    """Simulation state violates a precondition (e.g. object inside a wall)."""


class InsufficientPointsError(DynamapError):
    """Too few points for the requested geometric operation."""
