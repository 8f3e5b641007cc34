"""Exception types.  The CLI maps ``ConfigError`` to exit code 2 and
``NumericalError`` to exit code 3."""


class ConfigError(ValueError):
    pass


class NumericalError(ArithmeticError):
    """A numerical-consistency failure: the data contradict the model."""


class FloquetError(NumericalError):
    pass


class NonPositiveMomentError(NumericalError):
    """A moment estimate that must be positive came out <= 0."""

    def __init__(self, observable: str, value: float):
        super().__init__(f"{observable}: non-positive moment estimate {value:.6g}")
        self.observable = observable
        self.value = value


class DepolarizingModelError(NumericalError):
    pass
