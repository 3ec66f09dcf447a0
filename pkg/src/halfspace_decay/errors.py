"""Exception hierarchy and the process exit-code contract.

Exit codes: 0 success, 2 precondition refusal, 3 inequality/assertion
failure beyond tolerance, 4 I/O or schema error.  When several events occur
in one run the strictest (numerically largest) code wins.
"""

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_VIOLATION = 3
EXIT_IO = 4


class HalfspaceDecayError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class PreconditionError(HalfspaceDecayError):
    """Inputs were refused before any verdict was computed.

    A refusal is not a failed verification: it means the operation's
    hypotheses do not hold, so no pass/fail statement is made.
    """

    exit_code = EXIT_PRECONDITION


class DegenerateLatticeError(PreconditionError):
    """Basis matrix is singular (or numerically indistinguishable from it)."""


class RationalityRequiredError(PreconditionError):
    """An exact rational Gram matrix or quasimomentum was required."""


class FormArityError(PreconditionError):
    """A quadratic form of a different arity was required."""


class BudgetExceededError(PreconditionError):
    """Lattice-point enumeration would exceed the configured element budget."""


class GridError(PreconditionError):
    """Grids are incommensurate, too coarse, or otherwise unusable."""


class ResolutionError(PreconditionError):
    """Quadrature resolution-adequacy gate failed; no verdict was computed."""


class SolverError(PreconditionError):
    """The discrete linear system could not be solved reliably."""

    def __init__(self, message: str, condition_estimate: float | None = None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class VerificationError(HalfspaceDecayError):
    """An inequality or assertion failed beyond the error budget."""

    exit_code = EXIT_VIOLATION


class SchemaError(HalfspaceDecayError):
    """A configuration or input document violated its schema."""

    exit_code = EXIT_IO


def strictest_exit_code(codes) -> int:
    """Combine per-case exit codes; the strictest (largest) one wins."""
    worst = EXIT_OK
    for c in codes:
        worst = max(worst, int(c))
    return worst
