"""Exception types shared across the package.

Two families matter to the CLI: :class:`ConfigError` (bad input, exit code 2)
and :class:`NumericalError` (a computation that cannot proceed, exit code 3).
"""


class ConfigError(ValueError):
    """Invalid user-supplied parameters."""


class MemoryTooSmallError(ConfigError):
    """Source memory is smaller than one of the channel memories."""


class InvalidRowsError(ValueError):
    """Transition probabilities do not form stochastic rows."""


class KappaDomainError(ValueError):
    """Argument lies outside the domain of the surrogate penalty."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to produce a valid result."""


class NotIrreducibleError(NumericalError):
    """Support graph of a transition matrix is not strongly connected."""


class ReducibleMatrixError(NotIrreducibleError):
    """The Perron-Frobenius matrix of the surrogate step is reducible."""


class SingularSystemError(NumericalError):
    """Linear elimination failed or left an inconsistent residual."""


class NoWaterError(NumericalError):
    """Water-pouring cannot place the requested energy."""
