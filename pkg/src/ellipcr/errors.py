"""Exception hierarchy for the ellipcr package."""


class EllipcrError(Exception):
    """Base class for all package-specific errors."""


class InadmissiblePoint(EllipcrError):
    """Point lies off the strictly pseudoconvex locus (some |z_j| too small)."""


class BranchFailure(EllipcrError):
    """A fractional power would be evaluated too close to its branch point."""


class RankDeficiency(EllipcrError):
    """A frame block did not have the expected dimension."""


class TypeMismatch(EllipcrError):
    """A tangent vector did not have the required type (e.g. not (1,0))."""


class ZeroVector(EllipcrError):
    """An operation received a (near-)zero tangent vector."""


class UnsupportedField(EllipcrError):
    """A vector-field name outside the adapted frame family."""


class MapSyntaxError(EllipcrError):
    """Map word failed to parse; ``offset`` points at the failure position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class InvalidParameter(EllipcrError):
    """Structurally valid map word with parameters violating its contract."""


class MapDomainError(EllipcrError):
    """Map evaluated at a point outside its domain of definition."""


class EvaluationFailure(EllipcrError):
    """A scalar-function handle could not be evaluated on its chart patch."""


class FitFailure(EllipcrError):
    """Parameter fit left a residual above tolerance."""


class NotLeviIsometric(EllipcrError):
    """Map handed to the isometry recovery does not have CR factor 1."""


class BlockRoutingAmbiguous(EllipcrError):
    """Pushforward of a frame block is not carried by a single block."""


class ValidationFailure(EllipcrError):
    """Reconstructed map failed held-out validation."""
