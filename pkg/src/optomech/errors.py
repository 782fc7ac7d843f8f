"""Exception hierarchy shared by every module."""


class OptomechError(ValueError):
    """Base class for all errors raised by this package."""


class ValidationError(OptomechError):
    """A parameter record violates a physical or stability constraint."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class SumMismatch(ValidationError):
    pass


class BlueDetuned(ValidationError):
    pass


class Overcoupled(ValidationError):
    pass


class NonPositiveRate(ValidationError):
    pass


class Unstable(ValidationError):
    """The drift matrix has an eigenvalue with non-negative real part."""


class NearPole(OptomechError):
    """Real-valued spring/damping forms evaluated where kappa^2 + Delta^2 = omega^2."""


class NoRoot(OptomechError):
    def __init__(self, message, max_attainable=None):
        super().__init__(message)
        self.max_attainable = max_attainable


class ZeroCoupling(OptomechError):
    pass


class InvalidPort(OptomechError):
    pass


class ZeroCarrier(OptomechError):
    pass


class ZeroFrequency(OptomechError):
    pass


class NotConverged(OptomechError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class UnstableBlowup(OptomechError):
    pass


class NotSettled(OptomechError):
    pass


class TooShort(OptomechError):
    pass


class ConfigError(OptomechError):
    pass
