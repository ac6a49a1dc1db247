class InvalidInput(ValueError):
    pass


class DegenerateInput(ValueError):
    pass


class NumericalFailure(ArithmeticError):
    """Raised when a variance recursion leaves (0, 1e12] or goes non-finite."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class IncompleteAnneal(RuntimeError):
    """The tempering schedule hit its stage cap before reaching temperature 1.

    ``partial`` holds the cloud and trace at the point of failure.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class OptimizationFailure(RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []
