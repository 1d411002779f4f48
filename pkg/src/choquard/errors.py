"""Exception types shared across the package."""


class ChoquardError(Exception):
    pass


class InvalidParameters(ChoquardError, ValueError):
    """Raised when (N, alpha, mu, p) violate the admissible ranges.

    ``violations`` carries the human readable list of failed constraints.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class UncoveredRange(ChoquardError, ValueError):
    pass


class GridMismatch(ChoquardError, ValueError):
    pass


class ZeroFunctionError(ChoquardError, ValueError):
    pass


class DivergentIntegral(ChoquardError, ValueError):
    pass


class QuadratureError(ChoquardError, RuntimeError):
    pass


class NonexistenceRange(ChoquardError, ValueError):
    pass


class OverlapError(ChoquardError, ValueError):
    pass


class NonfiniteSample(ChoquardError, FloatingPointError):
    pass


class ModeError(ChoquardError, ValueError):
    """An operation was asked for in the wrong (subcritical/critical) mode."""


class EmptyWindow(ChoquardError, ValueError):
    pass


class ConcentrationWarning(UserWarning):
    """The Levy renormalization wanted a dilation past the grid ends."""
