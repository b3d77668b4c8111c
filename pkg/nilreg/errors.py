"""
Exception hierarchy for nilreg.

Every error carries a stable error_code and a context dict so that the CLI can
emit the same ErrorDetails payload the library raises.
"""
from typing import Any, Dict, Optional

from nilreg.models import ErrorDetails


class NilregError(Exception):
    error_code = "NILREG_ERROR"
    exit_code = 1

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def details(self) -> ErrorDetails:
        return ErrorDetails(
            error_code=self.error_code,
            error_message=self.message,
            context={k: str(v) for k, v in self.context.items()},
        )


class StructuralError(NilregError):
    error_code = "STRUCTURAL_MISMATCH"


class PreconditionError(NilregError):
    error_code = "PRECONDITION_FAILED"


class SpecValidationError(NilregError):
    error_code = "SPEC_VALIDATION_FAILED"

    def __init__(self, message: str, report: Optional[Any] = None, **context: Any):
        super().__init__(message, **context)
        self.report = report


class BallBudgetExceeded(NilregError):
    """Raised when enumeration outgrows max_elements; keeps what was finished."""

    error_code = "BALL_BUDGET_EXCEEDED"

    def __init__(self, message: str, partial: Optional[Any] = None, completed_radius: int = -1, **context: Any):
        super().__init__(message, completed_radius=completed_radius, **context)
        self.partial = partial
        self.completed_radius = completed_radius


class CosetBudgetExceeded(NilregError):
    error_code = "COSET_BUDGET_EXCEEDED"


class NotInBallError(NilregError):
    error_code = "NOT_IN_BALL"


class InsufficientDataError(NilregError):
    error_code = "INSUFFICIENT_DATA"


class RankValidationError(NilregError):
    error_code = "RANK_VALIDATION_FAILED"


class SpecInconsistencyError(NilregError):
    error_code = "SPEC_INCONSISTENCY"


class StepBudgetExceeded(NilregError):
    error_code = "STEP_BUDGET_EXCEEDED"


class WitnessVerificationError(NilregError):
    error_code = "WITNESS_VERIFICATION_FAILED"

    def __init__(self, message: str, clause: str = "", report: Optional[Any] = None, **context: Any):
        super().__init__(message, clause=clause, **context)
        self.clause = clause
        self.report = report


class EmptyWitnessSetError(NilregError):
    error_code = "EMPTY_WITNESS_SET"


class CatalogInconsistencyError(NilregError):
    error_code = "CATALOG_INCONSISTENCY"


class CatalogLookupError(NilregError):
    error_code = "CATALOG_LOOKUP"


class DependencyError(NilregError):
    error_code = "MISSING_DEPENDENCY"


class InvariantViolation(NilregError):
    error_code = "INVARIANT_VIOLATION"


class StatisticalFailure(NilregError):
    error_code = "STATISTICAL_FAILURE"


class DomainError(NilregError):
    error_code = "DOMAIN_ERROR"


class NumericalError(NilregError):
    error_code = "NUMERICAL_ERROR"


class ConfigurationError(NilregError):
    error_code = "CONFIGURATION_ERROR"


class TruncationError(NilregError):
    error_code = "TRUNCATION_ERROR"


class SchreierTableError(NilregError):
    error_code = "SCHREIER_TABLE_CORRUPT"


class AcceptanceFailure(NilregError):
    error_code = "ACCEPTANCE_FAILED"
    exit_code = 2
