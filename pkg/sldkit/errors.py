from __future__ import annotations


class SldkitError(RuntimeError):
    """Base class for every error raised by sldkit."""

    exit_code: int = 2


class InputError(SldkitError):
    """The caller supplied something invalid: a matrix, a model file, a parameter point."""

    exit_code = 1


class SolverError(SldkitError):
    """A numerical route could not produce a trustworthy answer."""

    exit_code = 2


class CrossValidationError(SldkitError):
    exit_code = 3


class BoundViolation(SldkitError):
    """Mixin-style base for errors that report a measured value against a bound."""

    def __init__(self, message: str, measured: float | None = None, bound: float | None = None):
        super().__init__(message)
        self.measured = measured
        self.bound = bound


# Errors shared by several solver modules.


class NotFullRank(SolverError):
    pass


class NoConvergence(SolverError):
    pass


class ClassViolation(SolverError, BoundViolation):
    pass


class DimensionMismatch(InputError):
    pass


def bound_message(what: str, measured: float, bound: float) -> str:
    return f"{what} = {measured:.3e} exceeds bound {bound:.1e}"
