"""Exception hierarchy shared by all engines."""


class RetrialError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(RetrialError, ValueError):
    pass


class UnsupportedFamily(RetrialError):
    """The service family has no regularly varying tail expansion."""


class InfiniteMoment(RetrialError):
    pass


class UnstableModel(RetrialError):
    """Raised when the traffic intensity is not below one."""


class SecondOrderUnavailable(RetrialError):
    """Second-order expansions need a finite second service moment (a > 2)."""


class DivergenceGuard(RetrialError, ArithmeticError):
    """Series coefficients blew up; the model or truncation is being misused."""


class IndexBeyondTruncation(RetrialError, IndexError):
    pass


class DomainError(RetrialError, ValueError):
    pass


class InsufficientIdleTime(RetrialError):
    pass


class TooFewSamples(RetrialError):
    pass


class ConfigError(RetrialError):
    """Bad command-line or config-file input."""
