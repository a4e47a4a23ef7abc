class ConfigError(ValueError):
    """Invalid design, scenario or study configuration."""


class BudgetExceededError(RuntimeError):
    """A search would need more replicates than the allowed budget."""

    def __init__(self, required: int, budget: int):
        super().__init__(f"search needs {required} replicates, budget is {budget}")
        self.required = required
        self.budget = budget


class InfeasibleGridError(RuntimeError):
    """No calibration grid point satisfies the error-rate constraint."""
