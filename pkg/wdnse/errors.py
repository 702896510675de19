"""Error kinds raised by the library. Everything derives from ValueError,
so the command line front end can report any of them as bad input."""

from __future__ import annotations


class InpParseError(ValueError):
    pass


class UnsupportedFeatureError(ValueError):
    pass


class NetworkValidationError(ValueError):
    pass


class HydraulicDomainError(ValueError):
    pass


class DimensionError(ValueError):
    pass


class EstimationError(ValueError):
    iteration: int

    def __init__(self, msg: str, iteration: int) -> None:
        super().__init__(f"{msg} (iteration {iteration})")
        self.iteration = iteration


class NoConvergenceError(ValueError):
    pass
