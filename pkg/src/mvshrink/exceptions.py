"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class MvShrinkError(Exception):
    """Base class for all library errors."""

    exit_code = 1

    @property
    def name(self) -> str:
        return type(self).__name__


class ConfigError(MvShrinkError, ValueError):
    """Invalid argument, shape or configuration value."""

    exit_code = 2


class NumericalError(MvShrinkError, ArithmeticError):
    """A quantity required by a formula is degenerate (singular, zero denominator)."""

    exit_code = 3


class RegimeError(NumericalError):
    """The concentration ratio p/n is outside the range a formula supports."""


class DataFormatError(MvShrinkError, ValueError):
    """An input file is missing or cannot be parsed."""

    exit_code = 4
