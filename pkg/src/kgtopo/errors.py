"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class KgtopoError(Exception):
    """Base class for every error raised by this package."""


# --- graph store ---------------------------------------------------------


class MalformedLineError(KgtopoError):
    """A triple-file line did not parse as three non-empty TSV fields."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class UnknownNodeError(KgtopoError):
    pass


class UnknownRelationError(KgtopoError):
    pass


class UnsupportedError(KgtopoError):
    pass


class CategoriesNotAssignedError(KgtopoError):
    """Node categories were requested before being assigned to the graph."""


# --- ontology ------------------------------------------------------------


class ParseFailureError(KgtopoError):
    """A model response could not be parsed; carries the raw text."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class RelationMismatchError(KgtopoError):
    """The relation echoed by the model differs from the one provided."""


class MissingRelationError(KgtopoError):
    """A graph relation is absent from the ontology's relation map."""


class OntologyBuildError(KgtopoError):
    """Ontology induction failed; carries the offending relation."""

    def __init__(self, relation: str, cause: Exception):
        super().__init__(f"relation {relation!r}: {cause}")
        self.relation = relation
        self.cause = cause


class OntologyInvalidError(KgtopoError):
    """A built ontology failed structural verification."""

    def __init__(self, violations: list[str]):
        super().__init__(
            f"{len(violations)} verification violation(s): " + "; ".join(violations)
        )
        self.violations = violations


# --- topology paths ------------------------------------------------------


class UnknownCategoryError(KgtopoError):
    pass


# --- prompt engine -------------------------------------------------------


class MissingPlaceholderError(KgtopoError):
    pass


class UnknownPlaceholderError(KgtopoError):
    pass


class NoWinnerError(KgtopoError):
    """No batch member could be identified in a tournament response."""


# --- completion backends -------------------------------------------------


class BackendError(KgtopoError):
    """Base class for completion-backend failures."""


class AuthError(BackendError):
    pass


class RateLimitedError(BackendError):
    pass


class TransportError(BackendError):
    pass


class BackendRefusedError(BackendError):
    pass


class CacheIoError(KgtopoError):
    pass


# --- predictor / evaluation ----------------------------------------------


class AllBatchesFailedError(KgtopoError):
    """Every tournament batch failed to yield a parseable winner."""


class TaskMismatchError(KgtopoError):
    """Two prediction runs do not cover the same task set."""


class ConfigError(KgtopoError):
    """A run configuration is incomplete or inconsistent."""
