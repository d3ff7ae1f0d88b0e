"""Exception types shared across the package."""


class KaneMeleError(Exception):
    """Base class for all package errors."""


class GapTooSmall(KaneMeleError):
    """A fiber has an eigenvalue too close to the chemical potential."""

    def __init__(self, message, k=None, energy=None):
        super().__init__(message)
        self.k = k
        self.energy = energy


class SingularFiber(GapTooSmall):
    """The Green function is evaluated at a pole."""


class NonConvergence(KaneMeleError):
    """A numerical procedure could not reach the requested tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class PhaseError(KaneMeleError):
    """A parameter point is not an insulator where one was required."""


class RefineGrid(KaneMeleError):
    """A plaquette phase is too close to the branch cut."""


class SingularInput(KaneMeleError):
    """Closed-form expression evaluated at a singular point."""


class SingularParameters(SingularInput):
    """Couplings at which a closed form has a vanishing denominator."""


class NoGap(GapTooSmall):
    """Finite flake has no gap around the chemical potential."""


class ConfigError(KaneMeleError):
    """Malformed configuration file."""
