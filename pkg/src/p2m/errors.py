"""Error types shared across the package."""


class P2MError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(P2MError):
    """Invalid configuration document, unit token, library reference, or
    model parameter (maps to CLI exit code 2)."""


class GeometryError(P2MError):
    """Layer geometry degenerates at some pipeline stage.

    `stage` names where the geometry broke: "binning" or "conv".
    """

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"{stage}: {message}")


class ShapeMismatchError(P2MError):
    """Tensor shape does not match the declared layer geometry."""

    def __init__(self, expected, actual, what: str = "tensor"):
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(f"{what} shape mismatch: expected {self.expected}, got {self.actual}")


class FitError(P2MError):
    """Curve fit cannot be performed on the given sample set."""
