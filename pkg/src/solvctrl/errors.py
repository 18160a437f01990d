"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
1 for a failed hypothesis guard, 2 for usage/parse problems and 3 for a
numerical check that exceeded its tolerance.
"""

from __future__ import annotations


class SolvctrlError(Exception):
    exit_code = 3


class GuardFailure(SolvctrlError):
    """A structural hypothesis required by a construction does not hold."""

    exit_code = 1
    hypothesis = "unspecified"

    def __init__(self, message: str, hypothesis: str | None = None):
        if hypothesis is not None:
            self.hypothesis = hypothesis
        super().__init__(f"[{self.hypothesis}] {message}")


class NumericalFailure(SolvctrlError):
    """A residual check failed; ``residual`` names the offending quantity."""

    exit_code = 3
    residual_name = "residual"

    def __init__(self, message: str, value: float | None = None):
        self.value = value
        super().__init__(f"[{self.residual_name}] {message}")


class ParseError(SolvctrlError):
    exit_code = 2

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        prefix = f"{location}: " if location else ""
        super().__init__(prefix + message)


class DimensionMismatch(SolvctrlError, ValueError):
    exit_code = 2


# algebra
class JacobiViolation(NumericalFailure):
    residual_name = "jacobi"


class NotAntisymmetric(NumericalFailure):
    residual_name = "antisymmetry"


class NotSolvable(GuardFailure):
    hypothesis = "solvable"


class NotNilpotent(GuardFailure):
    hypothesis = "nilpotent"


class NotAnIdeal(GuardFailure):
    hypothesis = "ideal"


class TriangularizationFailed(NumericalFailure):
    residual_name = "common-eigenvector"


# derivations
class NotADerivation(NumericalFailure):
    residual_name = "leibniz"


class ClusteringAmbiguous(NumericalFailure):
    residual_name = "eigenvalue-clustering"


class NotElliptic(GuardFailure):
    hypothesis = "elliptic"


# group
class DetGapTooSmall(GuardFailure):
    hypothesis = "det(I - phi) != 0"


class ResidualNotCentral(NumericalFailure):
    residual_name = "central-residual"


class AutomorphismCertificateFailed(NumericalFailure):
    residual_name = "bracket-preservation"


# dynamics
class StepSizeUnderflow(NumericalFailure):
    residual_name = "rk4-refinement"


class N0NotTrivial(GuardFailure):
    hypothesis = "N0 compact (n0 = 0)"


class D0Singular(GuardFailure):
    hypothesis = "det D0 != 0"


class ANotNilpotent(GuardFailure):
    hypothesis = "A nilpotent"


class ControlOutOfRange(SolvctrlError, ValueError):
    exit_code = 2


# analysis
class PeriodicityResidualExceeded(NumericalFailure):
    residual_name = "periodicity"
