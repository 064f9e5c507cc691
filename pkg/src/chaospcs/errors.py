"""Exception types shared across the package."""


class ChaosPCSError(Exception):
    """Base class for all package errors."""


class DomainError(ChaosPCSError, ValueError):
    """A chaotic-map argument or key component lies outside (0, 1)."""


class DimensionError(ChaosPCSError, ValueError):
    """Array shapes do not agree."""


class SizeLimitError(ChaosPCSError, ValueError):
    """A combinatorial routine was asked for a problem beyond its cap."""


class FormatError(ChaosPCSError, ValueError):
    """A key, ciphertext or image file is malformed."""
