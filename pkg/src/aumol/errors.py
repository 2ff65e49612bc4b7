"""Exception hierarchy shared by every subsystem."""


class AumolError(Exception):
    """Base class for all package errors."""


class ContractError(AumolError):
    """A documented precondition was violated by the caller."""


class ShapeError(AumolError, ValueError):
    """Array shapes are incompatible for the requested operation."""


class NumericError(AumolError, ArithmeticError):
    """A NaN or infinity appeared where finite values are required."""


class ConfigError(AumolError, ValueError):
    """Invalid configuration, or a configuration mismatch."""


class InvalidConfig(ConfigError):
    """Frontend parameters out of range (frequency bounds, sizes)."""


class EmptyAudio(AumolError, ValueError):
    pass


class InvalidAudio(AumolError, ValueError):
    pass


class ShortAudio(AumolError, ValueError):
    pass


class ChecksumError(AumolError):
    """Checkpoint bytes failed the CRC32 integrity check."""


class UnsupportedVersion(AumolError):
    pass
