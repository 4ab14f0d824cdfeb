"""Errors raised by the estimators.

The Monte Carlo engine turns these into per-method exclusion counts, so they
carry no state beyond a message.
"""


class RMSTError(Exception):
    """Base class for estimation failures on a single dataset."""


class NonIdentifiable(RMSTError):
    """The likelihood has no finite maximiser for the requested model."""


class NotConverged(RMSTError):
    """Newton-Raphson hit its iteration limit before the gradient vanished."""


class NonEvaluable(RMSTError):
    """The Kaplan-Meier curve does not reach the requested horizon."""
