"""Exception hierarchy shared by all modules.

Exit-code mapping used by the CLI: validation failures exit 2, numeric
cross-check (contract) failures exit 3, resource exhaustion exits 4.
"""


class SpeclabError(Exception):
    exit_code = 1


class ValidationError(SpeclabError):
    """Bad input or violated precondition."""
    exit_code = 2


class ContractViolation(SpeclabError):
    """A numeric self-check that must hold came out false."""
    exit_code = 3


class ResourceExhausted(SpeclabError):
    """Precision, integer-size or iteration budget ran out."""
    exit_code = 4


# -- continued fractions ----------------------------------------------------

class PrecisionExhausted(ResourceExhausted):
    """Remaining input precision cannot certify the next partial quotient."""


class InsufficientDepth(ValidationError):
    """Continued fraction does not hold enough convergents for the request."""


class Overflow(ResourceExhausted):
    """Denominator growth exceeded the big-integer budget."""


class ThetaInSingularOrbit(ValidationError):
    """Phase lies (to tolerance) on the orbit of a hopping zero."""


# -- torus symbols ----------------------------------------------------------

class OutsideStrip(ValidationError):
    """Evaluation point lies outside the certified analyticity strip."""


class VanishesOnTorus(ValidationError):
    """Symbol has (numerically) a zero on the unit circle."""


class WindingMismatch(ContractViolation):
    """Argument-increment and root-count winding numbers disagree."""


class StripNotCertified(ValidationError):
    """Declared strip radius is inconsistent with coefficient decay."""


# -- cocycles / operators ---------------------------------------------------

class SingularHopping(ValidationError):
    """|c| below tolerance at a sampled orbit point."""

    def __init__(self, msg, site=None):
        super().__init__(msg)
        self.site = site


class ConvergenceFailure(ContractViolation):
    """Eigensolver failed to converge."""


class PeakNearBoundary(ValidationError):
    """Eigenvector peak too close to the truncation edge for a decay fit."""


# -- duality transforms -----------------------------------------------------

class AliasingBudgetExceeded(ValidationError):
    """Grid field occupies the top x-frequency band; transform not exact."""


# -- reducibility -----------------------------------------------------------

class MeanNotZero(ValidationError):
    """Cohomological right-hand side has a non-negligible mean."""


class SmallDivisorBlowup(ContractViolation):
    """A Fourier mode of the cohomology solution exceeded the size budget."""


class BranchObstruction(ValidationError):
    """sqrt(c/conj c) needs the double-cover lift (odd winding)."""


class IllConditioned(ContractViolation):
    """Smallest two singular values coincide: conjugacy fit not unique."""


class SingularOnGrid(ValidationError):
    """Matrix function (numerically) singular at a grid point."""


# -- extended Harper atlas --------------------------------------------------

class NotRegionOne(ValidationError):
    """Coupling triple is outside the isotropic positive-exponent region."""


class InvalidParameters(ValidationError):
    """Coupling triple fails basic positivity requirements."""
