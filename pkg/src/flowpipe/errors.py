"""Exception types shared across the package."""


class FlowPipeError(Exception):
    """Base class for all flowpipe errors."""


class ParameterError(FlowPipeError, ValueError):
    """An argument violates a documented precondition."""


class TimeDomainError(FlowPipeError, ValueError):
    """A timestep is outside [0, 1] or not on the inference grid."""


class StateError(FlowPipeError, RuntimeError):
    """An operation was invoked in a state it cannot handle."""


class EngineRefusalError(StateError):
    """The compiled engine rejected a heterogeneous-timestep batch."""


class InvariantError(FlowPipeError, RuntimeError):
    """An internal invariant failed; indicates a bug, not bad input."""


class ConfigError(FlowPipeError, ValueError):
    """A configuration file or value is invalid.

    Carries the offending line number when the error originates from
    parsing a file.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
