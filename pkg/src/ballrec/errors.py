"""Exception types shared across the package."""


class BallrecError(Exception):
    """Base class for all package errors."""


class EmptyBinPicked(BallrecError):
    """A strategy picked a bin with no balls in it (a strategy bug)."""


class AllBinsEmpty(BallrecError):
    """No ball anywhere, so no bin can be recycled (m = 0)."""


class ZeroProbabilityOccupied(BallrecError):
    """A bin with probability zero holds balls, so X^2/p is undefined."""


class InvalidBinCount(BallrecError):
    """Bin count outside the constructor's valid range."""


class WeightsFileError(BallrecError):
    """Weights file is empty or contains a negative/NaN/unparsable entry."""


class StateSpaceTooLarge(BallrecError):
    """Exact analysis would need more states than the configured cap."""

    def __init__(self, count: int, cap: int):
        super().__init__(f"state space has {count} states, cap is {cap}")
        self.count = count
        self.cap = cap


class ZeroProbabilityBin(BallrecError):
    """Optimal-policy solve requires every bin weight to be positive."""


class ZeroFrequencyPositiveWeight(BallrecError):
    """Frequency bound needs f_j > 0 wherever p_j > 0."""


class EmptyBuffer(BallrecError):
    """Flush requested on an empty insertion buffer."""


class BTooLarge(BallrecError):
    """Spacing offset B must be smaller than the number of points."""


class StatefulStrategyWarning(UserWarning):
    """Flow-equation check applied to a strategy with internal state."""
