"""Exception types shared across the package."""


class RejectedInputError(ValueError):
    """An argument has the wrong shape or violates a precondition."""


class NumericError(ArithmeticError):
    """A field or Jacobian evaluation produced a non-finite value."""


class DivergenceError(NumericError):
    """Integration produced a non-finite state.

    ``last_time`` is the last grid time at which the state was finite.
    """

    def __init__(self, message, last_time):
        super().__init__(message)
        self.last_time = last_time


class ContainmentError(RuntimeError):
    """A sampled state or input fell outside the set the encoder expected."""

    def __init__(self, message, step, which):
        super().__init__(message)
        self.step = step
        self.which = which


class CorruptStreamError(ValueError):
    """A symbol stream carries an index outside the current alphabet."""


class InfeasibleError(ValueError):
    """Parameters do not satisfy the feasibility condition."""


class MemberCapError(RejectedInputError):
    """A family would exceed the allowed number of members."""

    def __init__(self, message, required):
        super().__init__(message)
        self.required = required
