"""Exception hierarchy.

Every pipeline failure derives from :class:`QPLError` so the CLI can map
it onto an exit code while keeping the originating module in the message.
"""


class QPLError(Exception):
    """Base class for all library errors."""

    module = "qpl"


# arithmetic
class NonConvergent(QPLError, ValueError):
    module = "arithmetic"


class CapExceeded(QPLError):
    """No return to the target before the scan cap."""

    module = "arithmetic"


# potential
class PotentialError(QPLError, ValueError):
    module = "potential"


class TooManyCriticalPoints(PotentialError):
    pass


class DegenerateCritical(PotentialError):
    pass


class NotEven(PotentialError):
    pass


# cocycle
class DegenerateNorm(QPLError):
    """Matrix is (numerically) a rotation; its contracting direction is undefined."""

    module = "cocycle"


class CocycleOverflow(QPLError, OverflowError):
    module = "cocycle"


# spectral oracle
class NoLocalizedState(QPLError):
    module = "oracle"


# induction
class NoBracketing(QPLError):
    module = "induction"


class LostCriticalPoint(QPLError):
    module = "induction"


# eigen
class DepthExceeded(QPLError):
    module = "eigen"


class NotDiophantine(QPLError, ValueError):
    module = "eigen"


class NoSignChange(QPLError):
    module = "eigen"


class NonCauchy(QPLError):
    module = "eigen"


class ResidualTooLarge(QPLError):
    module = "eigen"


class InsufficientDecay(QPLError):
    module = "eigen"


# cli
class ConfigError(QPLError, ValueError):
    """Invalid run configuration; ``field`` names the offending entry."""

    module = "cli"

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
