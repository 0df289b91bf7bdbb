"""
Exception and warning types shared across the toolkit
"""


class ExpansionError(Exception):
    """Base class for every error raised by the toolkit"""


class DomainError(ExpansionError, ValueError):
    """A parameter lies outside the domain of the operation"""


class GridMismatchError(ExpansionError, ValueError):
    """Two grid functions are not sampled on the same grid"""


class FactorizationError(ExpansionError):
    """Cholesky factorization of a covariance matrix failed"""


class JetOrderError(ExpansionError):
    """A word is longer than the configured differentiation depth"""


class BudgetExceededError(ExpansionError):
    """Word tables or permutation enumerations exceed the configured budget"""


class DivergentTailError(ExpansionError):
    """A remainder tail did not start decaying within the term horizon"""


class PicardConvergenceError(ExpansionError):
    """Picard iteration did not reach the tolerance within max_iter"""


class SolverBlowupError(ExpansionError):
    """The Picard trajectory produced NaN or overflowed"""


class ConfigError(ExpansionError):
    """Experiment configuration could not be parsed or validated"""

    def __init__(self, message: str, line: int = None, column: int = None):
        super().__init__(message)
        self.line = line
        self.column = column


class HolderHintWarning(UserWarning):
    """Hölder exponents of integrand and integrator do not sum above 1"""


class SeriesMagnitudeWarning(UserWarning):
    """Lie series norm exceeds the configured trust radius"""


class ReplicateCountWarning(UserWarning):
    """Too few Monte Carlo replicates for a reported interval"""
