"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class FormatError(ValidationError):
    """A file is not valid VXF (bad magic, header, or payload size)."""


class DegenerateClusterError(RuntimeError):
    """A cluster lost all membership mass (empty column in U)."""


class UndefinedMetricError(ValueError):
    """A segmentation metric is undefined for the given counts."""
