"""Exception hierarchy shared by all modules."""


class FacetflowError(Exception):
    """Base class."""


class ParseError(FacetflowError):
    """Input could not be decoded into a profile."""


class ValidationError(FacetflowError):
    """Input decoded but violates a profile invariant."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid profile")


class DomainError(FacetflowError, ValueError):
    """Point or argument outside the admissible range."""


class UnsupportedBoundary(FacetflowError, ValueError):
    """Operation not defined for the given boundary data."""


class StructuralError(FacetflowError):
    """Facet or Omega bookkeeping became inconsistent."""


class DegenerateFacet(FacetflowError, ValueError):
    """Zero-length facet: velocity must be obtained by integrating in h."""


class SteadyState(FacetflowError):
    """No facet moves; there is no next event."""


class NumericalDefect(FacetflowError):
    """Livelock, NaN, or an impossible discriminant."""
