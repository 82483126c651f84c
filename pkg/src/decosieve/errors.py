"""Failure taxonomy shared across the package.

Each class maps to a distinct process exit code in the command-line shell,
so scripted pipelines can tell a bad input file from a blown-up run.
"""


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration. Exit code 2."""


class TruncationError(RuntimeError):
    """State leaked into the truncated edge of a finite basis, or an
    integrator invariant (trace, positivity) drifted past its abort
    threshold. Carries a ``report`` dict with the offending numbers.
    Exit code 3."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = dict(report or {})


class QuadratureError(RuntimeError):
    """A numerical quadrature failed its own refinement self-check.
    Exit code 4."""


class DegeneracyError(ValueError):
    """An operation that requires a nondegenerate spectrum was handed a
    degenerate one. Carries the offending level pairs. Exit code 5."""

    def __init__(self, message, pairs=None):
        super().__init__(message)
        self.pairs = list(pairs or [])


EXIT_CODES = {
    ConfigError: 2,
    TruncationError: 3,
    QuadratureError: 4,
    DegeneracyError: 5,
}
