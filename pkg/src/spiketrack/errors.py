"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Tensor shapes do not line up."""


class ValidationError(ValueError):
    """A parameter or model violates its invariants."""


class UsageError(ValueError):
    """Bad call arguments (empty inputs, unknown names, t = 0, ...)."""


class ModelFormatError(ValueError):
    """A model or data file could not be parsed."""
