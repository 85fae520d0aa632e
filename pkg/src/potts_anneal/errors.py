"""Exception types raised across the package."""


class DomainError(ValueError):
    """An input lies outside the domain an operation is defined on."""


class UnsupportedConfigurationError(ValueError):
    """The requested configuration is valid in general but not supported here."""


class CapacityError(ValueError):
    """The problem is too large for the dense method used."""


class RoundFailure(RuntimeError):
    """An iterative half-hot round could not produce a feasible selection."""

    def __init__(self, round_index: int, message: str):
        super().__init__(f"round {round_index}: {message}")
        self.round_index = round_index


class RepairBudgetExceeded(RuntimeError):
    """Half-hot repair needed more flips than it was allowed."""
