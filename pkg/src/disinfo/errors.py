class ScenarioError(ValueError):
    """Invalid scenario document or parameter value.

    ``path`` names the offending key, e.g. ``"params.p"``.
    """

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class BlowUpError(ArithmeticError):
    """A state left the finite range during integration."""

    def __init__(self, t, message="non-finite or overflowing state"):
        self.t = t
        super().__init__(f"{message} at t={t:.6g}")


class NoConvergence(RuntimeError):
    def __init__(self, message, history=None):
        self.history = list(history) if history is not None else []
        super().__init__(message)


class NonMonotonicBracket(ValueError):
    """Bisection endpoints do not straddle a Track -> Tip switch."""
