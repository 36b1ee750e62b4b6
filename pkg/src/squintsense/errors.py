"""Exception hierarchy shared by the sensing library and the CLI."""


class DomainError(ValueError):
    """An angle, frequency or sine value lies outside its valid domain."""


class DesignError(ValueError):
    """A frontend design request is degenerate or produces overlapping ranges."""


class ConfigError(ValueError):
    """A scenario or system configuration is inconsistent."""


class SensingError(RuntimeError):
    """Base class for sensing outcomes that yield no direction estimate."""


class NotInRangeError(SensingError):
    """The user did not receive any beam of the sensing pass."""


class NoIntersectionError(SensingError):
    """The two candidate sets share no element within tolerance."""


class AmbiguousIntersectionError(SensingError):
    """More than one disjoint candidate pair matched within tolerance."""


class ValidationUnavailableError(SensingError):
    """No shifted initial angle satisfies the validation constraints."""
