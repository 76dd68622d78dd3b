"""Exception hierarchy shared by the analysis modules and the CLI."""


class FicdsError(Exception):
    """Base class for every error raised by this package."""


class InvalidParametersError(FicdsError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DelayNotExpandedError(FicdsError, ValueError):
    """An operation needs a delay-free rational but got a symbolic delay."""


class PoleHitError(FicdsError, ZeroDivisionError):
    def __init__(self, omega):
        self.omega = omega
        super().__init__(f"frequency response evaluated at a pole (omega={omega!r} rad/s)")


class RootFindingError(FicdsError, ArithmeticError):
    """The polynomial root finder did not converge."""


class TopologyMismatchError(FicdsError, ValueError):
    """Inverter modes do not fit the requested system composition."""


class IslandedWithoutFormerError(TopologyMismatchError):
    """An islanded system was requested without a grid-forming inverter."""


class PathError(FicdsError, KeyError):
    def __init__(self, path, message="cannot resolve parameter path"):
        self.path = path
        super().__init__(f"{message}: {path!r}")

    def __str__(self):
        return self.args[0]


class NoBoundaryError(FicdsError, ValueError):
    """Both ends of a bisection bracket carry the same verdict."""


class AmbiguousEndpointError(FicdsError, ValueError):
    """A bisection endpoint sits inside the marginal band."""


class InsufficientDataError(FicdsError, ValueError):
    """A trace is too short to classify."""


class ConfigError(FicdsError, ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
