"""Exception hierarchy.

Every error carries a stable ``name`` that the command line prints on stderr.
Validation problems (bad inputs) map to exit code 2, numerical failures to 3.
"""

from __future__ import annotations


class KrylovError(Exception):
    """Base class for all package errors."""

    exit_code = 3

    @property
    def name(self) -> str:
        return type(self).__name__


class ValidationError(KrylovError, ValueError):
    exit_code = 2


class NumericalError(KrylovError, ArithmeticError):
    exit_code = 3


# weights
class NonIntegrable(ValidationError):
    """Power-law exponent rho <= -1 makes |w|^rho non-integrable at zero."""


class EvalAtZeroSingularity(ValidationError):
    """Weight with rho < 0 evaluated exactly at the origin."""


class NoClosedForm(ValidationError):
    """Requested closed-form quantity does not exist for this family."""


class WeightUnavailable(ValidationError):
    """Weight requested outside the range where it is known."""


# pauli_liouville
class SupportOverflow(NumericalError):
    """A Pauli string grew beyond the configured maximum support."""


class TermBudgetExceeded(NumericalError):
    """The Krylov operator would exceed the configured number of Pauli strings."""


class BreakdownError(NumericalError):
    """Krylov space exhausted: some b_n fell below the breakdown threshold."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


# weight_lanczos
class PrecisionExhausted(NumericalError):
    """Orthogonality drift exceeded what the working precision can support."""


class GridTooCoarse(NumericalError):
    """Tabulated grid too coarse: refinement moved b_n beyond tolerance."""


# coulomb_gas
class NoBracket(NumericalError):
    """Root of the MRS equation could not be bracketed."""


class QuadratureNonConvergent(NumericalError):
    """Quadrature did not converge to the requested tolerance."""


# special functions
class SpecialFunctionDomain(NumericalError):
    """Special function evaluated outside its usable domain."""


class BesselDomain(SpecialFunctionDomain):
    pass


class AiryDomain(SpecialFunctionDomain):
    pass


# greens
class PoleProximity(NumericalError):
    """Continued-fraction denominator vanished."""

    def __init__(self, message: str, level: int | None = None):
        super().__init__(message)
        self.level = level


# bootstrap
class SigmaNegative(NumericalError):
    """Bootstrap produced a negative equilibrium density."""


class StepTooCoarse(NumericalError):
    """Halving the frequency step changed the result beyond tolerance."""


class NegativePhi(NumericalError):
    """Bootstrap produced a negative spectral function."""


# transport
class FitUnstable(NumericalError):
    """Least-squares fit standard error is too large to trust."""


class InsufficientPoints(ValidationError):
    """Too few data points for the requested fit."""


# universality
class InversionOutOfRange(ValidationError):
    """Unfolding map inverted outside its tabulated range."""
