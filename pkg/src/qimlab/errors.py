"""Exception types shared across the package."""


class QimlabError(Exception):
    """Base class for all package-specific errors."""


class ZeroDimension(QimlabError):
    """A dimension or count that must be at least 1 was zero."""


class DimensionMismatch(QimlabError):
    """Vector and operator dimensions disagree."""


class ZeroSignal(QimlabError):
    """The operation requires a nonzero signal."""


class SingularDenominator(QimlabError):
    """A QIM1 denominator fell below the singularity guard."""


class DomainError(QimlabError):
    """A scalar argument lies outside the mathematical domain."""


class NonFinite(QimlabError):
    """An iterate left the finite floating-point range."""


class ConfigError(QimlabError):
    """An experiment configuration is invalid."""
