"""Exception types shared across the package."""

import numpy as np


class ContractError(ValueError):
    """Arguments violate a shape or range precondition."""


class DomainError(ValueError):
    """A value lies outside the support or parameter domain of a family."""


class SingularityError(np.linalg.LinAlgError):
    """A matrix that must be inverted is singular (or not positive-definite).

    ``condition`` carries a condition-number estimate when one is available.
    """

    def __init__(self, message, condition=None, step=None):
        super().__init__(message)
        self.condition = condition
        self.step = step


class DecompositionError(np.linalg.LinAlgError):
    """A covariance matrix does not admit the parameter/state block form."""


class ConfigError(ContractError):
    """An experiment configuration is malformed; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
