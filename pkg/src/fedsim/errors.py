"""Exception hierarchy shared by every fedsim module."""


class FedSimError(Exception):
    """Base class for all fedsim errors."""


class ConfigurationError(FedSimError, ValueError):
    """Invalid shapes, parameters or run configuration."""


class ParseError(FedSimError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        self.message = message
        super().__init__(message if line is None else f"line {line}: {message}")


class DivergenceError(FedSimError, ArithmeticError):
    """An iterate became non-finite or left the divergence threshold."""

    def __init__(self, message, client=None, step=None):
        self.client = client
        self.step = step
        super().__init__(message)


class ProtocolError(FedSimError):
    """Malformed frame, unexpected message, or missing participant."""

    def __init__(self, message, offset=None):
        self.offset = offset
        super().__init__(message if offset is None else f"{message} (at byte offset {offset})")


class EncodeError(ProtocolError):
    pass


class OracleError(FedSimError, RuntimeError):
    """A ground-truth computation failed to certify its result."""
