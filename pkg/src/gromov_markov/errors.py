"""Exception hierarchy shared by the library and the command line."""

from __future__ import annotations


class GromovMarkovError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 3


class ConfigError(GromovMarkovError):
    """Invalid presentation or run configuration."""

    exit_code = 1

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = source
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ResourceLimitError(GromovMarkovError):
    """A configured element or work budget was exceeded."""

    exit_code = 2


class BoundaryError(GromovMarkovError):
    """The requested object needs data beyond the enumerated ball."""

    exit_code = 2


class DomainError(GromovMarkovError, ValueError):
    """An argument lies outside the domain of an operation."""

    exit_code = 1


class PreconditionError(GromovMarkovError):
    """An operation was called on inputs that violate its precondition."""


class OracleError(GromovMarkovError):
    """The group oracle produced inconsistent answers."""


class InconclusiveError(GromovMarkovError):
    """A finite search could not decide the question within its budget."""

    exit_code = 2


class UndecidedError(GromovMarkovError):
    """Exact mode could not certify its answer (state-key audit failed)."""


class InconsistencyError(GromovMarkovError):
    """A constructed map or structure violates a required property."""


class CensusIncompleteError(GromovMarkovError):
    """A simplex type has no model with a known preimage."""


class GluingError(GromovMarkovError):
    """Preimage gluing is ambiguous or conflicting."""


class VerificationError(GromovMarkovError):
    """A verification report failed."""

    exit_code = 3
