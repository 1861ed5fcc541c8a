"""Exception hierarchy shared across the package."""


class BudgetwiseError(Exception):
    """Base class for all library errors."""


class InvalidDistributionError(BudgetwiseError, ValueError):
    pass


class DimensionError(BudgetwiseError, ValueError):
    pass


class InvalidPlanError(BudgetwiseError, ValueError):
    pass


class InfeasibleError(BudgetwiseError):
    """Some target group has positive mass but no source can supply it."""


class BudgetTooSmallError(BudgetwiseError):
    """The budget cannot buy a single sample (or the plan rule buys none)."""


class ResourceLimitError(BudgetwiseError):
    pass


class InvalidWeightsError(BudgetwiseError, ValueError):
    pass


class InsufficientDataError(BudgetwiseError):
    pass


class DomainError(BudgetwiseError, ValueError):
    pass
