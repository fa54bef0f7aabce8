"""Exception types shared across the package."""


class RegimePreconditionError(ValueError):
    """A closed-form regime was asked to run outside its preconditions."""


class SingularDetuningError(RegimePreconditionError):
    def __init__(self, mode: int, detuning: float, floor: float):
        self.mode = mode
        self.detuning = detuning
        super().__init__(
            f"mode {mode} has detuning {detuning!r}, below the floor {floor!r}"
        )


class DegenerateModeError(RegimePreconditionError):
    """Resonance formula called with a mode of the wrong degeneracy class."""


class TopologyError(RegimePreconditionError):
    """Operation is not defined for the chain's topology."""


class TruncationError(ArithmeticError):
    """A truncated series did not meet its tail bound."""


class BesselRangeError(ValueError):
    """Bessel order outside the supported range."""
