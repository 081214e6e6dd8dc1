"""Exception taxonomy shared by the whole package.

The CLI maps these onto exit codes: validation-type failures exit 1,
file-format failures exit 2.
"""


class ValidationError(ValueError):
    """Input violates a documented precondition or structural invariant."""


class RangeError(ValidationError):
    """A numeric parameter (rank, size, k) is outside its allowed range."""


class UnknownLanguageError(ValidationError):
    """A language id was requested that the model or corpus does not know."""


class FormatError(ValueError):
    """An on-disk artifact is malformed (bad header, wrong byte count, ...)."""


class CorruptionError(FormatError):
    """An on-disk artifact parsed but its payload fails integrity checks."""
