"""Exception hierarchy.

Input problems derive from :class:`InputError` (a ``ValueError``); problems
that only show up once the numbers are crunched derive from
:class:`NumericalError`. The CLI maps the two families to different exit codes.
"""


class URCError(Exception):
    """Base class for every error raised by this package."""


class InputError(URCError, ValueError):
    pass


class NumericalError(URCError, ArithmeticError):
    pass


class AllZero(InputError):
    pass


class NegativeEntry(InputError):
    pass


class InvalidProbability(InputError):
    pass


class ShapeMismatch(InputError):
    pass


class CountMismatch(InputError):
    pass


class LengthMismatch(InputError):
    pass


class EmptySample(InputError):
    pass


class MissingClass(InputError):
    pass


class SingleClass(InputError):
    pass


class DegeneratePartition(InputError):
    pass


class DegenerateGrid(InputError):
    pass


class ZeroPriorCoordinate(InputError):
    pass


class InvalidConfig(InputError):
    pass


class InconsistentSpec(InputError):
    pass


class RankDeficient(NumericalError):
    def __init__(self, message, rank=None, condition_number=None):
        super().__init__(message)
        self.rank = rank
        self.condition_number = condition_number
