# svspec/service/exceptions.py
from __future__ import annotations

__all__: list[str] = [
    "SpectralError",
    # input
    "ParseError",
    "NotHermitian",
    "OutOfDomain",
    "BadKind",
    "DegenerateMean",
    "MeanNotZero",
    # integration
    "StepLimitExceeded",
    "ToleranceNotMet",
    # spectrum certification
    "ZeroOnContour",
    "NonIntegerWinding",
    "CountMismatch",
    "NotAnEigenvalue",
    "GramNotPositive",
    "IndexingAmbiguous",
    # data sufficiency / series
    "InsufficientShells",
    "NearPole",
    "TailTooLarge",
    # inverse kit
    "OutOfNeighborhood",
    "SpectraTooClose",
    "WrongIndexCombination",
    "CoincidentEigenvalues",
    "RankDeficientGram",
    "CountingHypothesisViolated",
    "SingularUpperBlock",
    "SingularY",
    "LogDivergent",
    # scalar data
    "ProductNotConverged",
    "InterlacingViolated",
    "NonPositiveAlpha",
    "NotMonotone",
]


class SpectralError(RuntimeError):
    """Base class of every svspec domain failure."""
    pass


# -------- Input --------

class ParseError(SpectralError):
    """Raised when an input file is malformed or does not match its schema."""
    pass

class NotHermitian(SpectralError):
    """Raised when a matrix that must be Hermitian is not, within tolerance."""
    pass

class OutOfDomain(SpectralError):
    """Raised when a potential is evaluated outside [0, 1]."""
    pass

class BadKind(SpectralError):
    """Raised for an unknown Fourier coefficient kind or a negative harmonic."""
    pass

class DegenerateMean(SpectralError):
    """Raised when two mean eigenvalues are closer than the gap threshold."""
    pass

class MeanNotZero(SpectralError):
    """Raised when a perturbation direction is not mean-zero."""
    pass


# -------- Integration --------

class StepLimitExceeded(SpectralError):
    """Raised when |lambda| is too large for the shooting integrator."""
    pass

class ToleranceNotMet(SpectralError):
    """Raised when the integrator cannot reach the requested tolerance."""
    pass


# -------- Spectrum certification --------

class ZeroOnContour(SpectralError):
    """Raised when det chi(0, .) is numerically zero on a counting contour."""
    pass

class NonIntegerWinding(SpectralError):
    """Raised when the argument-principle sum is not close to an integer."""
    pass

class CountMismatch(SpectralError):
    """Raised when refined eigenvalues do not match the certified count."""
    pass

class NotAnEigenvalue(SpectralError):
    """Raised when a supplied lambda has no numerical kernel."""
    pass

class GramNotPositive(SpectralError):
    """Raised when a restricted Gram matrix fails to be positive definite."""
    pass

class IndexingAmbiguous(SpectralError):
    """Raised when the shell assignment of eigenvalues is not unique."""
    pass


# -------- Data sufficiency / series --------

class InsufficientShells(SpectralError):
    """Raised when too few double-indexed shells are available."""
    pass

class NearPole(SpectralError):
    """Raised when M is requested too close to an eigenvalue."""
    pass

class TailTooLarge(SpectralError):
    """Raised when the estimated series tail exceeds its tolerance."""
    pass


# -------- Inverse kit --------

class OutOfNeighborhood(SpectralError):
    """Raised when a conditioning guard fails away from the reference frame."""
    pass

class SpectraTooClose(SpectralError):
    """Raised when two frame eigenvalues are neither distinct nor coincident."""
    pass

class WrongIndexCombination(SpectralError):
    """Raised when (alpha, j, k) does not select a gradient kernel."""
    pass

class CoincidentEigenvalues(SpectralError):
    """Raised when a biorthogonality check needs distinct eigenvalues."""
    pass

class RankDeficientGram(SpectralError):
    """Raised when S_beta P_beta loses rank."""
    pass

class CountingHypothesisViolated(SpectralError):
    """Raised when the exceptional set does not remove m eigenvalues per channel."""
    pass

class SingularUpperBlock(SpectralError):
    """Raised when the leading block of B-tilde is singular."""
    pass

class SingularY(SpectralError):
    """Raised when the shell matrix Y_n is singular."""
    pass

class LogDivergent(SpectralError):
    """Raised when ||U - I|| >= 1 and the logarithm series diverges."""
    pass


# -------- Scalar data --------

class ProductNotConverged(SpectralError):
    """Raised when a Hadamard product or its tail fails to converge."""
    pass

class InterlacingViolated(SpectralError):
    """Raised when mixed and Dirichlet eigenvalues do not interlace."""
    pass

class NonPositiveAlpha(SpectralError):
    """Raised when a normalizing constant is not positive."""
    pass

class NotMonotone(SpectralError):
    """Raised when an eigenvalue sequence is not strictly increasing."""
    pass
