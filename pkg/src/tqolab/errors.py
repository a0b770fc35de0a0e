"""Shared exception types."""


class ResourceCapError(RuntimeError):
    """A dimension or basis-size cap was exceeded; the message names the cap."""


class NumericalError(RuntimeError):
    """An iterative solver failed to converge; carries a residual report."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ModelValidationError(ValueError):
    """A model file or model definition violates a structural requirement."""


class FlowAbortError(RuntimeError):
    """The spectral flow was stopped because the tracked gap fell below the floor."""

    def __init__(self, s: float, gap: float, floor: float):
        super().__init__(f"flow aborted at s={s:.6g}: gap {gap:.6g} below floor {floor:.6g}")
        self.s = s
        self.gap = gap
        self.floor = floor
