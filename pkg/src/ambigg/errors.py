"""Exception types shared across the solver.

The CLI maps ``ConfigError``/``AssumptionError`` to exit code 2 and every
``NumericalError`` to exit code 3.
"""


class AmbiggError(Exception):
    """Base class for all solver errors."""


class ConfigError(AmbiggError, ValueError):
    """A run configuration could not be parsed or is inconsistent."""


class AssumptionError(AmbiggError, ValueError):
    """A model violates one of the structural assumptions A1-A5."""


class UnsupportedError(AmbiggError, ValueError):
    """The requested model/prior combination has no implemented pathway."""


class DomainError(AmbiggError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class NumericalError(AmbiggError, ArithmeticError):
    """Base class for failures of a numerical procedure."""


class EvaluationError(NumericalError):
    """A callback returned a non-finite value.

    ``x`` carries the offending abscissa (or precision, for Xi scans).
    """

    def __init__(self, message: str, x: float):
        super().__init__(f"{message} (at {x!r})")
        self.x = x


class ContractError(NumericalError):
    """A computed object violates a guarantee the theory says must hold."""


class ConvergenceError(NumericalError):
    """An iterative procedure did not reach its tolerance."""
