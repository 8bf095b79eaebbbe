"""Exception hierarchy shared by all engine and analysis modules."""


class ClockError(Exception):
    """Base class for all otclock errors."""


class ModelError(ClockError):
    """Invalid network definition (duplicate species, bad stoichiometry, ...)."""


class ModelParseError(ModelError):
    """Syntax or reference error in a model file, with source position."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        pos = ""
        if line is not None:
            pos = f" (line {line}" + (f", col {column})" if column is not None else ")")
        super().__init__(message + pos)


class RateEvaluationError(ClockError):
    """A rate law produced a negative or non-finite value."""

    def __init__(self, reaction, value, detail=""):
        self.reaction = reaction
        self.value = value
        msg = f"rate law of reaction '{reaction}' evaluated to {value!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class IntegrationFailure(ClockError):
    """ODE step size underflow or step budget exhausted."""

    def __init__(self, t_reached, detail="step size underflow"):
        self.t_reached = t_reached
        super().__init__(f"integration failed at t={t_reached:.6g} h: {detail}")


class ConvergenceFailure(ClockError):
    """Fixed-point search did not reach the requested residual."""

    def __init__(self, best_residual, detail=""):
        self.best_residual = best_residual
        msg = f"fixed-point search stalled at residual {best_residual:.3e}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NumericalFailure(ClockError):
    """Generic numerical breakdown (eigenvalue iteration, singular Jacobian, ...)."""


class InvalidQueryError(ClockError):
    """Query references unknown observables or lies outside the simulated horizon."""


class EnsembleFormatError(ClockError):
    """Raw-ensemble file is corrupt or has an unsupported version."""


class SweepError(ClockError):
    """Too many individual runs of a mutational sweep failed."""
