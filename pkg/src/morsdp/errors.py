"""Exception hierarchy shared by every module.

Each class carries a short machine-readable ``code`` that the CLI prints as
``code: <code>`` on standard error.
"""


class MorsdpError(Exception):
    code = "error"


class ModelError(MorsdpError, ValueError):
    """Invalid model document or model object."""

    code = "model-error"


class ModelSyntaxError(ModelError):
    code = "syntax-error"


class StochasticityError(ModelError):
    code = "stochasticity-error"


class FeasibilityError(ModelError):
    code = "feasibility-error"


class CostBoundError(ModelError):
    code = "cost-bound-error"


class UtilityError(ModelError):
    """Bad utility expression, arity mismatch or failed monotonicity probe."""

    code = "utility-error"


class UtilityDomainError(UtilityError, ArithmeticError):
    code = "utility-domain-error"


class BudgetError(MorsdpError, MemoryError):
    """A configured size budget (states, atoms, policies) would be exceeded."""

    code = "budget-exceeded"


class NumericalError(MorsdpError, ArithmeticError):
    code = "numerical-failure"


class PolicyQueryError(MorsdpError, LookupError):
    code = "policy-query-error"


class InconsistencyError(MorsdpError, RuntimeError):
    """Internal consistency check failed (a bug or a corrupted structure)."""

    code = "internal-inconsistency"
