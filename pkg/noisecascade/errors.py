"""Exceptions and warnings raised by the noisecascade library."""


class NoiseCascadeError(Exception):
    """Base class of every error raised by noisecascade."""


class InvalidQuantityError(NoiseCascadeError, ValueError):
    """A physical quantity violates its precondition (range, finiteness)."""


class ConfigError(NoiseCascadeError):
    """A configuration document is malformed or inconsistent.

    Attributes:
        key (str): the offending key path (dotted), if known
    """

    def __init__(self, message, key=None):
        if key:
            message = "%s: %s" % (key, message)
        super().__init__(message)
        self.key = key


class CurveFormatError(ConfigError):
    """A noise-curve file does not follow the CSV schema."""


class NumericalError(NoiseCascadeError):
    """A computation could not produce a meaningful number."""


class InsufficientDataError(NumericalError):
    """Too few usable points for a fit."""


class FitConvergenceError(NumericalError):
    """The bounded least-squares solver did not converge.

    Attributes:
        cost (float): the final cost
        active_bounds (list of str): names of the parameters at a bound
    """

    def __init__(self, message, cost=None, active_bounds=()):
        super().__init__("%s (final cost=%.6g, active bounds=%s)" %
                         (message, cost if cost is not None else float("nan"),
                          list(active_bounds)))
        self.cost = cost
        self.active_bounds = list(active_bounds)


class InferenceError(NumericalError):
    """An inverse inference produced an unphysical (negative) noise.

    Attributes:
        frequencies (list of float): the frequencies (Hz) where it happened
    """

    def __init__(self, message, frequencies=()):
        super().__init__(message)
        self.frequencies = list(frequencies)


class NoiseBudgetWarning(UserWarning):
    """A result is usable but outside the regime its model assumes."""
