"""Exception types shared across the package."""


class TeamCommError(Exception):
    """Base class for all package errors."""


class ScenarioValidationError(TeamCommError):
    """A scenario description violates a model invariant.

    Carries the full list of structured violations so callers can report
    every problem at once instead of the first one found.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(str(v) for v in self.violations)
        super().__init__(msg)


class InvalidDistribution(TeamCommError):
    """A probability vector is malformed (negative mass or bad total)."""


class MissingObservationKernel(TeamCommError):
    """Imperfect-encryption mode needs a user-supplied observation table."""


class ZeroProbabilityOutcome(TeamCommError):
    """A belief update conditioned on an outcome of probability zero."""


class InadmissiblePrescription(TeamCommError):
    """A prescription violates the active communication constraints."""


class SizeLimitExceeded(TeamCommError):
    """An enumeration grew past its configured cap."""


class NodeCapExceeded(TeamCommError):
    """The solver expanded more belief nodes than the configured cap."""


class PolicyModelMismatch(TeamCommError):
    """A policy or artifact was produced from a different scenario."""


class UnreachableNodeQueried(TeamCommError):
    """A policy lookup left the reachable belief tree."""


class UnsupportedInfoStructure(TeamCommError):
    """The requested operation does not support this information structure."""
