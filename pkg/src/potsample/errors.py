"""Exceptions raised by the samplers and bound builders."""


class PotsampleError(Exception):
    """Base class for errors raised by this package."""


class InfiniteEnvelopeError(PotsampleError):
    """The mixture proposal for the chosen term has infinite mass.

    Raised when a reduced-potential lower bound is -inf or when the
    bound factor times the truncated density mass diverges on some
    interval.  Picking a different term index usually fixes it.
    """


class UnboundedRegionError(PotsampleError):
    """The transformed acceptance region cannot be enclosed.

    Raised when an auxiliary-potential lower bound is -inf, so the
    region extends to infinity along some ray.  The tails of the
    target are too heavy for the chosen power parameter.
    """


class InvariantViolationError(PotsampleError):
    """An envelope was caught below the target density.

    This indicates a broken bound (a bug or an invalid model
    declaration), so sampling aborts rather than returning draws from
    the wrong distribution.
    """
