"""Error types shared across the library.

The CLI maps these onto its exit-code contract, so new failure modes
should reuse one of the classes below rather than raising bare
exceptions.
"""


class ShapeError(ValueError):
    """Operands have incompatible dimensions."""


class FormatError(ValueError):
    """A file does not conform to its binary container format.

    byte_offset, when not None, is the position at which parsing failed.
    """

    def __init__(self, message, byte_offset=None):
        super().__init__(message)
        self.byte_offset = byte_offset


class NumericalError(RuntimeError):
    """A numerical routine produced non-finite values or an SVD failed.

    step carries the iteration / diffusion-step index when known.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
