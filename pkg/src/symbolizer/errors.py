"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SymbolizerError(Exception):
    """Base class for all errors raised by symbolizer."""


class VocabularyError(SymbolizerError, ValueError):
    """A vocabulary, object set or identifier is malformed."""


class TypedError(SymbolizerError, ValueError):
    """A ground atom violates the vocabulary's typing rules.

    ``kind`` is one of ``unknown-predicate``, ``arity-mismatch``,
    ``unknown-object`` or ``type-mismatch``; ``symbol`` names the offending
    predicate or object and ``position`` the argument index when relevant.
    """

    def __init__(self, kind: str, symbol: str, message: str, position: int | None = None):
        super().__init__(message)
        self.kind = kind
        self.symbol = symbol
        self.position = position


class ContradictionError(SymbolizerError, ValueError):
    """A goal contains the same atom with both polarities."""


class DuplicateNameError(SymbolizerError, ValueError):
    """Two objects share a name."""


class ParseError(SymbolizerError, ValueError):
    """Raw text could not be parsed.

    For PDDL input ``line`` and ``column`` are 1-based.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class SchemaViolation(SymbolizerError, ValueError):
    """A decoded document does not conform to its schema."""

    def __init__(self, path: str, message: str):
        super().__init__(f"at {path or '/'}: {message}")
        self.path = path


class EmptyResult(SymbolizerError):
    """The grounder returned nothing usable."""


class TransportError(SymbolizerError):
    """The model endpoint could not be reached or answered with an error."""


class InconsistentState(SymbolizerError, ValueError):
    """A symbolic state violates the rules of its simulator domain."""


class InapplicableAction(SymbolizerError):
    """An action label cannot be applied; ``step`` is its index in the plan."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class UnsupportedRequirement(ParseError):
    """A PDDL requirement flag outside the supported subset."""

    def __init__(self, requirement: str, line: int | None = None, column: int | None = None):
        super().__init__(f"unsupported requirement {requirement}", line, column)
        self.requirement = requirement


class UnsupportedSize(SymbolizerError, ValueError):
    """Instance size outside the supported range."""


class MissingCredentials(SymbolizerError):
    """Live mode was requested but the API key variable is not set."""
