"""Shared exception types; each carries the CLI exit code it maps to."""


class ResonormError(Exception):
    exit_code = 5


class ConfigError(ResonormError):
    """Bad configuration, missing file, malformed input."""

    exit_code = 2


class GeometryMismatchError(ResonormError):
    """Operands live on different phase-space geometries."""


class DivisorError(ResonormError):
    """A small-divisor condition failed; carries the diagnostic reports."""

    exit_code = 3

    def __init__(self, message, reports=None):
        super().__init__(message)
        self.reports = reports or []


class CoverageError(ResonormError):
    """Requested comparison window is not covered by the operator basis."""

    exit_code = 4


class InvariantError(ResonormError):
    """A numerical invariant that must hold was violated."""


class DivergenceError(ResonormError):
    """A supremum or integral that must be finite diverged."""
