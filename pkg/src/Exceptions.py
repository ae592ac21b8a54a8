from typing import Optional, Dict

# EXCEPTION HIERARCHY
class ITEError(Exception):
    """Base exception for itespec operations"""

    def __init__(self, message: str, details: Optional[Dict] = None):
        self.message=message
        self.details=details or {}
        super().__init__(self.message)


    def to_dict(self)-> Dict:
        return {
            "error": self.__class__.__name__,
            "message": self.message,
            "details": self.details
        }


"""categories, one per module; concrete errors below call __init__ of ITEError"""
class ValidationError(ITEError):
    """Input validation failed"""
    pass


class ConfigError(ValidationError):
    """Run configuration is malformed (details carry the field path)"""
    pass


class ProblemError(ITEError):
    """Transmission problem violates its sampled invariants"""
    pass


class SymbolError(ITEError):
    """Symbol calculus precondition failed"""
    pass


class HalfSpaceError(ITEError):
    """Half-space model could not be solved or fitted"""
    pass


class DiscretizationError(ITEError):
    """Operator assembly or solve failed"""
    pass


class SpectrumError(ITEError):
    """Eigenvalue location or counting failed"""
    pass


class ResolventError(ITEError):
    """Resolvent scan, bound or quasimode check failed"""
    pass


class IdentityError(ITEError):
    """Matrix identity instance is unusable"""
    pass


# problem
class IndexVanishes(ProblemError):
    """n(x) = 0 at a sampled point"""
    pass


class IndexOneOnCollar(ProblemError):
    """n(x) = 1 at a sampled point of the boundary collar"""
    pass


class BadGeometry(ProblemError):
    """Nonpositive radius, width or empty interval"""
    pass


class NoAdmissibleDirection(ProblemError):
    """Every grid direction meets the cone or the negative axis"""
    pass


class ZeroSpectralParameter(ProblemError):
    """z = 0 has no semiclassical scale"""
    pass


# symbols
class RealRoot(SymbolError):
    """A characteristic root is real, ellipticity fails"""
    pass


class ZeroLeadingCoefficient(SymbolError):
    pass


class WrongHalfPlane(SymbolError):
    """Roots are not in the half planes the kernel formula assumes"""
    pass


class NotElliptic(SymbolError):
    """Reduced boundary symbol is below the ellipticity threshold"""
    pass


class DepthTooLarge(SymbolError):
    pass


class SymbolicOverflow(SymbolError):
    """Numerator term count exceeded the configured cap"""
    pass


class StructureViolation(SymbolError):
    """Parametrix term breaks the degree/power bound"""
    pass


# halfspace
class NonDecayingData(HalfSpaceError):
    pass


class DegenerateCompanionMatrix(HalfSpaceError):
    """Companion eigenvalues (or a data frequency) collide"""
    pass


class FitUnstable(HalfSpaceError):
    """Log-log fit is unreliable or there is nothing to fit"""
    pass


class BoundarySystemMismatch(HalfSpaceError):
    """Traces from the reduced symbol do not satisfy the kernel-built boundary rows"""
    pass


# discretize
class TooFewNodes(DiscretizationError):
    pass


class GeometryMismatch(DiscretizationError):
    pass


class NotRadial(DiscretizationError):
    pass


class ModeTooLarge(DiscretizationError):
    pass


class NearSingular(DiscretizationError):
    """Condition number above the ceiling, parameter is near an eigenvalue"""
    pass


# eigensolve
class OutOfValidatedRange(SpectrumError):
    pass


class RegionTouchesCone(SpectrumError):
    pass


class UnresolvedCluster(SpectrumError):
    """Two distinct roots closer than the cluster tolerance"""
    pass


class IncompleteCoverage(SpectrumError):
    pass


# resolvent
class GridTooFine(ResolventError):
    pass


class HypothesisViolated(ResolventError):
    """Im n < 0 somewhere, or Im n vanishes identically"""
    pass


class SingularOnRealAxis(ResolventError):
    pass


class SignConditionFails(ResolventError):
    pass


class NoDecayingBranch(ResolventError):
    pass


class SupportLeaksBoundary(ResolventError):
    pass


class EmptyOmega(ResolventError):
    pass


# operator identities
class IllConditioned(IdentityError):
    pass


class EigenExtractionUnstable(IdentityError):
    pass
