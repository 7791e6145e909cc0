"""Exception types shared across the engine."""


class SqlWeaverError(Exception):
    """Base class for all engine errors."""


class DatabaseError(SqlWeaverError):
    """The database file is unreadable or corrupt."""


class EmptySchemaError(SqlWeaverError):
    """The database contains no user tables."""


class SqlParseError(SqlWeaverError):
    """A SQL statement could not be tokenized or segmented."""


class LinkParseError(SqlWeaverError):
    """A linking response contained no recognizable sections."""


class GatewayError(SqlWeaverError):
    """Base class for model gateway failures."""


class GatewayTimeout(GatewayError):
    """The completion deadline was exceeded."""


class GatewayUnavailable(GatewayError):
    """The remote backend failed after exhausting retries."""


class ScriptedMiss(GatewayError):
    """No scripted rule matched the prompt."""


class GenerationError(SqlWeaverError):
    """Candidate generation failed; carries the gateway diagnostic."""


class RejectedStatement(SqlWeaverError):
    """A non-read statement was refused before execution."""


class IngestionError(SqlWeaverError):
    """A benchmark directory could not be loaded."""


class UnknownDatabase(SqlWeaverError):
    """The requested database id is not registered."""
