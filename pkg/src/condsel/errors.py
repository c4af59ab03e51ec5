"""Exception hierarchy shared by every condsel module."""


class CondSelError(Exception):
    """Base class for all errors raised by condsel."""


class ShapeError(CondSelError, ValueError):
    pass


class EmptyBatchError(ShapeError):
    pass


class NumericError(CondSelError, ArithmeticError):
    pass


class DivergenceError(NumericError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, epoch, batch, what="loss"):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite {what} at epoch {epoch}, batch {batch}")


class ConfigError(CondSelError, ValueError):
    pass


class ArgumentError(CondSelError, ValueError):
    pass


class LabelError(CondSelError, ValueError):
    pass


class IngestionError(CondSelError, ValueError):
    pass


class StratificationError(CondSelError, ValueError):
    pass


class BudgetExceededError(CondSelError):
    """Exhaustive search would need more evaluations than the budget allows."""

    def __init__(self, required, budget):
        self.required = required
        self.budget = budget
        super().__init__(
            f"exhaustive search needs {required} combinations, budget cap is {budget}"
        )
