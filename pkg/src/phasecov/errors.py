"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, NumericalError -> 3,
FormatError / OSError -> 4.
"""


class PhasecovError(Exception):
    """Base class for all package errors."""


class ConfigError(PhasecovError):
    """Invalid parameters, model specs, or configuration files."""


class NumericalError(PhasecovError):
    """A numerical procedure failed (non-convergence, degenerate input)."""


class FormatError(PhasecovError):
    """A file does not conform to one of the binary/JSON formats."""
