"""Exception hierarchy shared by all modules."""


class QOCTError(Exception):
    """Base class for every error raised by lrqoct."""


class DimensionError(QOCTError, ValueError):
    pass


class HermiticityError(QOCTError, ValueError):
    pass


class StateError(QOCTError, ValueError):
    """A pure state is not normalized or a density matrix is not a valid state."""


class DomainError(QOCTError, ValueError):
    """A time lies outside the control / contour interval."""


class GridError(QOCTError, ValueError):
    """Time grids, trajectories, or sampled functions do not line up."""


class UnsupportedTargetError(QOCTError, ValueError):
    pass


class ConfigError(QOCTError, ValueError):
    """Problem configuration could not be parsed; message names the field."""
