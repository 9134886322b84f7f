"""Exception types with stable machine-readable codes.

Every error the engine raises deliberately carries a short ``code`` string;
the CLI serializes it into the JSON error object on stderr, so the codes are
part of the external interface and must stay stable.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all deliberate engine errors."""

    code = "error"

    def __init__(self, message: str, certificate: str | None = None):
        super().__init__(message)
        self.certificate = certificate


class ParameterDomainError(EngineError):
    code = "parameter_domain"


class SchemaError(EngineError):
    code = "schema"


class RegimeError(EngineError):
    code = "regime"


class DiscretizationError(EngineError):
    code = "discretization"


class ToleranceError(EngineError):
    code = "tolerance"


class DegeneracyError(EngineError):
    code = "degeneracy"


class IterationError(EngineError):
    code = "iteration"


class TruncationError(EngineError):
    code = "truncation"


class ConsistencyError(EngineError):
    code = "consistency"


class ResolutionError(EngineError):
    code = "resolution"


class IncompleteTableError(EngineError):
    code = "incomplete_table"


class TableRangeError(EngineError):
    code = "table_range"


class InconclusiveCountError(EngineError):
    code = "inconclusive_count"


class QuadratureError(EngineError):
    code = "quadrature"


class SupportWarning(UserWarning):
    """Profile evaluated beyond the reliably resolved support."""


# Errors that mean "the request itself was invalid" (CLI exit code 2).
VALIDATION_ERRORS = (
    ParameterDomainError,
    SchemaError,
    RegimeError,
    ConsistencyError,
    ResolutionError,
    TableRangeError,
)

# Errors that mean "the computation did not certify/converge" (CLI exit code 3).
NUMERICAL_ERRORS = (
    DiscretizationError,
    ToleranceError,
    DegeneracyError,
    IterationError,
    TruncationError,
    IncompleteTableError,
    InconclusiveCountError,
    QuadratureError,
)
