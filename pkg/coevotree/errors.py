"""
Errors - Exception hierarchy for the coevotree library
"""


class CoevoError(Exception):
    """Base class for every error raised by coevotree"""


# Step distribution validation

class NegativeWeight(CoevoError):
    """A pmf weight is negative or not finite"""


class MassNotOne(CoevoError):
    """Weights do not sum to one within tolerance"""


class EmptySupport(CoevoError):
    """No weights given"""


class ParamOutOfRange(CoevoError):
    """Family parameter outside its valid range"""


# Numerics

class NoPositiveMassAtZero(CoevoError):
    """Operation needs p_0 > 0"""


class NoConvergence(CoevoError):
    """Iterative solver hit its iteration budget"""

    def __init__(self, message: str, iterations: int = 0):
        super().__init__(message)
        self.iterations = iterations


class TruncationBudgetExceeded(CoevoError):
    """Series truncation error cannot be bounded with the table at hand"""


class PgfInfinite(CoevoError):
    """Generating function diverges at the requested point"""


class PreconditionViolated(CoevoError):
    """Caller broke an operation precondition"""


# Simulation

class HorizonExplosion(CoevoError):
    """Projected tree size exceeds the memory budget"""


class MissingBirthTimes(CoevoError):
    """Statistic needs continuous birth times"""


class DegenerateSample(CoevoError):
    """Sample carries no tail information"""


# Files

class BadMagic(CoevoError):
    """File does not start with the tree magic"""


class TruncatedFile(CoevoError):
    """File ends before the declared payload"""


class InvariantViolation(CoevoError):
    """Tree arrays break a structural invariant"""


class AssumptionViolated(UserWarning):
    """Model assumptions fail; predictions are reported but flagged"""
