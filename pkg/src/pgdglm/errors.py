class RejectionCapError(RuntimeError):
    """A rejection loop exceeded its proposal cap."""


class PGSamplerError(RejectionCapError):
    """The Polya-Gamma sampler exceeded its proposal cap."""


class FilterBreakdownError(ArithmeticError):
    """A covariance lost positive (semi-)definiteness during filtering or sampling."""


class DegenerateChainError(ValueError):
    """Autocorrelation requested for a chain with zero variance."""


class DataError(ValueError):
    """Input data violate the series invariants."""
