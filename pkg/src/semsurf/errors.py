"""Exception taxonomy shared by all pipeline stages.

The CLI maps these onto exit codes: InputError -> 2, DegeneracyError -> 3,
anything else -> 4.
"""


class SemsurfError(Exception):
    """Base class for all errors raised by this package."""


class InputError(SemsurfError):
    """Bad user input: missing files, malformed formats, contract violations."""


class DegeneracyError(SemsurfError):
    """Numerically degenerate configuration: rank deficiency, inconsistent
    annotations, non-PSD metric constraints and similar."""
