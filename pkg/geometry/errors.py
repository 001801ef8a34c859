"""
Exception hierarchy for the geometry toolkit
"""


class GeometryError(ValueError):
    """Base class for every error raised by the geometry modules"""


class PoleHit(GeometryError):
    """Evaluation point coincides with a monopole point"""


class ToleranceUnreachable(GeometryError):
    """Series budget exhausted before reaching the requested tolerance"""


class DomainViolation(GeometryError):
    """Point lies outside the declared chart domain"""


class GaugeStringHit(GeometryError):
    """Point lies on the singular half-axis of the chosen gauge"""


class NonPositiveRadius(GeometryError):
    pass


class InvalidPair(GeometryError):
    """(beta, tau) is not an admissible ALG model pair"""


class SingularFiberHit(GeometryError):
    """Base point is the singular fiber y = 0"""


class DefiniteViolation(GeometryError):
    """Triple (or recovered metric) is not positive definite"""


class NearDegenerate(GeometryError):
    pass


class EmptyRegion(GeometryError):
    pass


class StencilOverrun(GeometryError):
    """Finite-difference stencil reaches into an excluded region"""


class PotentialMismatch(GeometryError):
    """Damage-zone difference is not reproduced by its primitive"""


class ScaleViolation(GeometryError):
    """Eguchi-Hanson scale exceeds the orbifold-parameter bound"""


class FixedPointMismatch(GeometryError):
    """Pole set is not symmetric under the involution"""


class DecayViolation(GeometryError):
    pass


class SectorMismatch(GeometryError):
    pass


class BoundaryTwistViolation(GeometryError):
    """Samples do not satisfy U(r, 2*pi*beta) = exp(2*pi*i*sigma) U(r, 0)"""


class IllConditioned(GeometryError):
    pass


class InsufficientRange(GeometryError):
    pass


class RegionUnresolved(GeometryError):
    """Probe point does not carry enough region data to be classified"""


class InvalidConfig(GeometryError):
    pass


class ConfigParse(GeometryError):
    """Scenario file is malformed or has out-of-range parameters"""


class ScenarioFailed(GeometryError):
    pass
