"""Exception types shared across the package."""


class MarginMaxerError(Exception):
    """Base class for all library errors."""


class DatasetError(MarginMaxerError, ValueError):
    """Invalid dataset contents (labels, norms, shapes)."""


class ParseError(DatasetError):
    """Malformed dataset file; the message names the offending row."""


class DimensionMismatchError(MarginMaxerError, ValueError):
    """Weight and dataset dimensions disagree."""


class ZeroVectorError(MarginMaxerError, ValueError):
    """Operation undefined for the zero vector."""


class NonUnitVectorError(MarginMaxerError, ValueError):
    """Reference direction must have unit length."""


class DegenerateDirectionError(MarginMaxerError, ValueError):
    """No usable orthogonal component, or no direction left to rescale."""


class NonSeparableError(MarginMaxerError, RuntimeError):
    """Data admit no positive-margin separator, or the solver cannot certify one."""


class FamilyMismatchError(MarginMaxerError, ValueError):
    """Dataset does not match the claimed synthetic family."""


class RateFitError(MarginMaxerError, ValueError):
    """Rate fit impossible on the requested window."""


class ConfigError(MarginMaxerError, ValueError):
    """Invalid configuration; the message names the field."""
