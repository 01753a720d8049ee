"""Shared exception types."""


class PatlogError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PatlogError):
    """Bad concrete syntax in an automaton or formula file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(PatlogError):
    """An automaton or formula violates a structural invariant."""


class FragmentError(PatlogError):
    """Formula lies outside every decidable fragment for the given monoid."""


class ResourceLimitError(PatlogError):
    """A configured resource guard (cardinality cap, memo cap, subset cap) fired."""


class WitnessSoundnessError(PatlogError):
    """Internal soundness failure: a produced witness did not re-verify."""


class ConfigError(PatlogError):
    """Contradictory or unusable search configuration."""
