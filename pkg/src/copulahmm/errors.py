"""Exception types shared across the package."""


class NumericalFailure(ArithmeticError):
    """A likelihood or pmf evaluation broke down numerically."""


class FitError(RuntimeError):
    """Optimization could not produce a usable fit."""


class StartRejected(FitError):
    """The objective is not finite at the supplied starting point."""
