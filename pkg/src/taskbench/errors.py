"""Exception types shared across the harness."""
from __future__ import annotations


class TaskbenchError(Exception):
    """Base class for every error raised by this package."""


class ParseError(TaskbenchError):
    """A pool definition file could not be parsed or fails validation."""

    def __init__(self, path, message, line=None):
        self.path = str(path)
        self.line = line
        location = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{location}: {message}")


class DuplicateDefinition(TaskbenchError):
    pass


class NotFound(TaskbenchError):
    pass


class IncompatibleSelection(TaskbenchError):
    pass


class SceneCountMismatch(TaskbenchError):
    pass


class CapabilityMissing(TaskbenchError):
    pass


class InvalidEnvironment(TaskbenchError):
    pass


class ModeViolation(TaskbenchError):
    pass


class SessionFinished(TaskbenchError):
    pass


class VariantMismatch(TaskbenchError):
    pass


class InvalidCommand(TaskbenchError):
    pass


class AddrInUse(TaskbenchError):
    pass


class Busy(TaskbenchError):
    pass


class NoMoreScenes(TaskbenchError):
    pass


class ConnectionError(TaskbenchError):  # noqa: A001 - mirrors the wire contract name
    """The supervisor could not be reached at all."""


class SupervisorUnhealthy(TaskbenchError):
    pass


class ProtocolError(TaskbenchError):
    """The supervisor answered with something outside the wire contract."""


class WrongChannel(TaskbenchError):
    pass


class ObservationError(TaskbenchError):
    pass


class AgentError(TaskbenchError):
    pass


class ResultValidationError(TaskbenchError):
    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message)


class SubmissionFailed(TaskbenchError):
    def __init__(self, exit_code, message=None):
        self.exit_code = exit_code
        super().__init__(message or f"submission exited with code {exit_code}")


class SchemaMismatch(TaskbenchError):
    pass


class EmptyInput(TaskbenchError):
    pass
