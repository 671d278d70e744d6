"""Exception types shared across the simulator."""


class CribsimError(Exception):
    """Base class for all simulator errors."""


class SceneError(CribsimError):
    """Invalid scene construction or entity lookup."""


class ParseError(CribsimError):
    """Config/scenario text error, annotated with source position."""

    def __init__(self, message: str, source: str = "<text>", line: int = 0, column: int = 0):
        self.source = source
        self.line = line
        self.column = column
        super().__init__(f"{source}:{line}:{column}: {message}")


class ProtocolError(CribsimError):
    """Wire protocol violation."""


class ExperimentError(CribsimError):
    """Evaluation harness misuse (bad spec, metric mismatch, aborted run)."""
