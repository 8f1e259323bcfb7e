"""Exception types shared across the package."""


class AcflowError(Exception):
    """Base class for all package errors."""


class ClosureOverflow(AcflowError):
    """Group closure exceeded the element cap (bad or non-terminating generators)."""


class NotInClosure(AcflowError):
    """Base point does not lie in the closed fundamental region."""


class HypothesisScanFailed(AcflowError):
    """Hessian scan could not certify a convexity neighborhood."""


class NonConvexQ(AcflowError):
    """Monitor function failed the midpoint convexity sample test."""


class GridTooLarge(AcflowError):
    """Requested grid exceeds the configured node cap."""


class StabilityViolation(AcflowError):
    """Flow iterate escaped the invariant ball; time step too large."""


class NoConvergence(AcflowError):
    """Flow hit max_steps above the residual tolerance."""


class DegenerateAnnulus(AcflowError):
    """Annulus with outer radius <= inner radius."""


class ProfileOverflow(AcflowError):
    """Radial profile growth overflows double precision (c*l too large)."""


class NoAdmissibleDelta(AcflowError):
    """Glue-width bisection exhausted without satisfying the barrier clauses."""


class BallOutsideD(AcflowError):
    """Requested ball is not contained in the cone region of the grid."""


class SeedBallRejected(AcflowError):
    """Starting ball failed the sup-estimate certification."""


class InsufficientNodes(AcflowError):
    """Too few usable nodes for a fit."""


class ParseError(AcflowError):
    """Malformed config document; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(AcflowError):
    """Config value outside its documented range; carries the key name."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
