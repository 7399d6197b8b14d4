"""
Exception types raised by the library.

Command handlers catch these, print a one-line message and exit with status 1.
Each one subclasses a builtin so callers can also catch ValueError / RuntimeError.
"""


class CatalogError(ValueError):
    """The configuration catalog is malformed or violates its cardinality."""


class SeverityError(ValueError):
    """A degradation severity parameter lies outside its declared range."""


class CropError(ValueError):
    """A scene is too small for the requested crop window."""


class ManifestError(RuntimeError):
    """A dataset manifest does not match the files or catalog on disk."""


class CheckpointError(RuntimeError):
    """A checkpoint is missing, unreadable, or was built against other inputs."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or activation."""


class FrozenParameterError(RuntimeError):
    """Parameters that must stay frozen changed during training."""


class UnknownVariantError(ValueError):
    """An ablation variant name is not in the supported set."""
