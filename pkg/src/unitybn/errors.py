"""Exception hierarchy for the inference engine."""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class DomainMismatchError(EngineError):
    """Two potentials share a variable name but disagree on its levelset."""


class DomainError(EngineError):
    """An operation was asked to use variables outside its operand's domain."""


class UndefinedDivisionError(EngineError):
    """A nonzero cell was divided by zero.

    Message passing never produces this; seeing it means an internal bug
    or a contract violation by the caller.
    """


class DegenerateModelError(EngineError):
    """The model assigns zero mass to the current evidence (or to everything)."""


class ContractViolationError(EngineError):
    """An internal structural guarantee failed (e.g. a non-chordal graph
    reached clique extraction, or a junction tree lost the running
    intersection property)."""


class PhaseError(EngineError):
    """A propagation operation was called out of phase order."""


class QueryError(EngineError):
    """A posterior query that the engine does not support (unknown variable,
    evidence variable queried, or variables spanning no single clique)."""


class ConfigurationError(EngineError):
    """Invalid smoothing or run configuration values."""


class ParseError(EngineError):
    """Syntax or semantic error in a network file."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{where}: {message}"
        super().__init__(message)


class IngestionError(EngineError):
    """Invalid tabular data (unknown level, header mismatch, etc.)."""
