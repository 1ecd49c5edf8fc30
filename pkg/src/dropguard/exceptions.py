"""Exception types shared across the package."""


class ShapeError(ValueError):
    """An operand has an incompatible shape; the message names the offending axis."""


class ZeroActivationError(ValueError):
    """Magnitude-proportional pruning is undefined on an all-zero activation vector."""


class ParamsFileError(ValueError):
    """A parameter file is unreadable: bad magic, unknown version, wrong
    architecture fingerprint, or truncated payload."""


class DataFormatError(ValueError):
    """A dataset file violates its binary format."""
