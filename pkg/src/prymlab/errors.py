"""Exception hierarchy for prymlab.

Every numerical failure mode carries its own class so the CLI can map it to
an exit code and reports can name it.
"""


class PrymlabError(Exception):
    """Base class for all library errors."""


class ConfigError(PrymlabError):
    pass


class DegenerateCurve(ConfigError):
    pass


class NumericalBreakdown(PrymlabError):
    """Base for failures of a numerical method (CLI exit code 3)."""


class NonConvergence(NumericalBreakdown):
    pass


class IllConditioned(NumericalBreakdown):
    pass


class SheetAmbiguity(NumericalBreakdown):
    pass


class FitIllConditioned(NumericalBreakdown):
    pass


class SingularSystem(NumericalBreakdown):
    pass


class BasisSearchFailed(NumericalBreakdown):
    pass


class TruncationOverflow(NumericalBreakdown):
    pass


class NearThetaDivisor(NumericalBreakdown):
    pass


class ZeroCountMismatch(NumericalBreakdown):
    pass


class NotSingleValued(NumericalBreakdown):
    pass


class CancellationUnsolvable(NumericalBreakdown):
    pass


class SingularAtZ(NumericalBreakdown):
    pass


class ExpansionFailed(NumericalBreakdown):
    pass


class RankDeficient(NumericalBreakdown):
    """Carries the observed rank and the singular values."""

    def __init__(self, message, rank=None, singular_values=None):
        super().__init__(message)
        self.rank = rank
        self.singular_values = singular_values
