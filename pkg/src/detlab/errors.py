"""Exception types raised across the package."""


class DetlabError(Exception):
    """Base class for all library errors."""


class SingularMatrix(DetlabError, ArithmeticError):
    """A matrix to be inverted is (numerically) rank deficient."""


class NonHermitian(DetlabError, ValueError):
    """A matrix expected to be Hermitian is not."""


class LengthMismatch(DetlabError, ValueError):
    """A sequence length is incompatible with the requested framing."""


class SearchSpaceTooLarge(DetlabError, ValueError):
    """Exhaustive ML search would enumerate more than 2**16 candidates."""


class DivergedState(DetlabError, ArithmeticError):
    """Adaptive weights blew up."""


class CpTooShort(DetlabError, ValueError):
    """Channel impulse response exceeds the cyclic prefix."""


class TargetNotBracketed(DetlabError, ValueError):
    """A BER curve never crosses the requested target."""


class ConfigError(DetlabError, ValueError):
    """Illegal simulation configuration."""


class ParseError(ConfigError):
    """Malformed or unknown entry in a config document."""


class ValidationError(ConfigError):
    """A config value violates a constraint."""
