"""Exceptions shared across the package."""


class NumericalError(RuntimeError):
    """An iterative routine could not meet its accuracy contract.

    Carries the last residual (or other diagnostic) seen before giving up,
    so callers and CI logs can tell a near-miss from a blow-up.
    """

    def __init__(self, message, residual=None):
        if residual is not None:
            message = f"{message} (last residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual
