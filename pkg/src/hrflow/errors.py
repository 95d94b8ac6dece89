"""
Exception hierarchy for hrflow.

Every failure that can end a run maps to one class here. Each error knows
which check failed and which process exit code the CLI should return, so
the runner can write a machine-readable ``error.json`` without a lookup
table.

Exit codes:
- 2: input error (bad document, unknown catalog key, malformed entry)
- 3: math-validation failure (algebra, split, isotropy, metric)
- 4: integrator failure
- 5: monitor violation / diagonality breakage
"""

from typing import Any


class HRFlowError(RuntimeError):
    """Base class for all hrflow errors."""

    exit_code: int = 3

    def __init__(
        self,
        message: str,
        *,
        check: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message)
        self.message = message
        self.check = check
        self.details = details or {}
        # partial FlowTrajectory when the error ends a flow run
        self.trajectory = None

    @property
    def kind(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict:
        """Convert to a JSON-serializable dictionary."""
        return {
            "error": self.kind,
            "message": self.message,
            "check": self.check,
            "exit_code": self.exit_code,
            "details": self.details,
        }


class InputError(HRFlowError):
    """Malformed document, unknown key or invalid parameters."""

    exit_code = 2


# =============================================================================
# MATH VALIDATION
# =============================================================================


class InvalidAlgebra(HRFlowError):
    """Antisymmetry or the Jacobi identity fails."""


class NotSemisimple(HRFlowError):
    """Killing form is degenerate."""


class InvalidCartanSplit(HRFlowError):
    """Signature, orthogonality or bracket closure of the split fails."""


class InvalidIsotropy(HRFlowError):
    """Isotropy is not a subalgebra of k, or acts with an invariance leak."""


class NotIrreducible(HRFlowError):
    """Casimir is not scalar on a module (Schur certificate failed)."""


class DegenerateMetric(HRFlowError):
    """A metric eigenvalue is not strictly positive."""


class EmptyFiber(HRFlowError):
    """Fiber split requested on a space with l = 0."""


class NotExtinct(HRFlowError):
    """Extinction analysis requested on a run that did not go extinct."""


class WrongRegime(HRFlowError):
    """Asymptotic profile requested for the wrong kind of run."""


# =============================================================================
# DYNAMICS
# =============================================================================


class IntegratorFailure(HRFlowError):
    """Non-finite values or unusable step control; carries the last good state."""

    exit_code = 4


class DiagonalityBroken(HRFlowError):
    """Ricci tensor left the diagonal ansatz; the eigenvalue ODE no longer applies."""

    exit_code = 5
