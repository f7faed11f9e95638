"""Exception hierarchy shared by all wdaep modules."""


class WdaepError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(WdaepError, ValueError):
    pass


class DimensionError(ShapeError):
    """Image too small for the requested filter bank."""


class UnsupportedWavelet(WdaepError, ValueError):
    pass


class ConfigError(WdaepError, ValueError):
    pass


class MaskError(WdaepError, ValueError):
    """No integer spoke count reaches the requested acceleration."""


class DataError(WdaepError, ValueError):
    pass


class UnsupportedDimension(WdaepError, ValueError):
    pass


class DegenerateReference(WdaepError, ValueError):
    """Reference image has no high-frequency content (LoG response is zero)."""


class CorruptFile(WdaepError, OSError):
    pass


class VersionMismatch(WdaepError, OSError):
    pass


class UsageError(WdaepError):
    pass
