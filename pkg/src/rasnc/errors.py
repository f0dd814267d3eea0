"""Exception types shared across the simulator."""


class InvalidArgumentError(ValueError):
    pass


class FrameOverflowError(ValueError):
    """A shifted signal does not fit inside the receive frame."""


class RankDeficientError(ArithmeticError):
    """The least-squares system does not have full column rank."""

    def __init__(self, rank, n_columns):
        super().__init__(f"rank {rank} < {n_columns} columns")
        self.rank = rank
        self.n_columns = n_columns


class DegenerateGainError(ArithmeticError):
    """A gain estimate is too close to zero to divide by."""

    def __init__(self, nodes):
        nodes = tuple(nodes)
        super().__init__(f"degenerate gain estimate for node(s) {nodes}")
        self.nodes = nodes


class InfeasiblePowerError(ValueError):
    pass


class DecodeFailure(Exception):
    """Raised by scheme runners when a decode cannot produce an estimate."""
