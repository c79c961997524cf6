"""Exception types shared across the package."""


class DegenerateInputError(ValueError):
    """Raised when a geometric solve has no unique solution.

    Typical causes: fewer than three correspondence pairs, or pairs that
    are collinear/coincident so the rotation is unconstrained.
    """


class CorruptFileError(Exception):
    """Raised when a binary or text file does not match its declared layout."""


class UnsupportedFormatError(CorruptFileError):
    """Raised when a file's magic bytes or version are not recognized."""
