"""Error hierarchy for casimir-worldline."""

from __future__ import annotations


class WorldlineError(Exception):
    """Base error for casimir-worldline."""


class SceneError(WorldlineError):
    """A scene or one of its objects is invalid."""


class SceneParseError(SceneError):
    """Scene text does not conform to the schema."""

    def __init__(self, message: str, line: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IntersectionUndecidableError(WorldlineError):
    """The common-intersection test cannot decide at the configured resolution."""

    def __init__(self, message: str, residual: float | None = None) -> None:
        super().__init__(message)
        self.residual = residual


class EnsembleError(WorldlineError):
    """Loop ensemble could not be generated, cached or loaded."""


class SamplingBoxUnboundedError(WorldlineError):
    """The kill region of a scene does not localize in some direction."""


class ConvergenceError(WorldlineError):
    """A numerical procedure failed to converge."""


class TailNotConvergedError(ConvergenceError):
    """The large-beta tail of the energy integral does not decay."""

    def __init__(self, message: str, exponent: float | None = None) -> None:
        super().__init__(message)
        self.exponent = exponent


class IntegrandCancellationError(ConvergenceError):
    """The combined scattering integrand is not finite."""


class QuadratureError(ConvergenceError):
    """Adaptive quadrature did not reach the requested tolerance."""


class GridError(WorldlineError):
    """A lattice eigenproblem is too large or produced an invalid spectrum."""


class DecayCheckError(WorldlineError):
    """A small-beta decay fit is not meaningful for the given scene."""

    def __init__(self, message: str, reason: str = "") -> None:
        super().__init__(message)
        self.reason = reason
