"""Exception hierarchy.

Two families matter to callers: :class:`InputError` (bad arguments, schema or
configuration problems) and :class:`NumericalError` (a solver or design that
could not produce an answer). The CLI maps them to exit codes 2 and 3.
"""


class JELError(Exception):
    """Base class for every error raised by this package."""


class InputError(JELError, ValueError):
    pass


class NumericalError(JELError, ArithmeticError):
    pass


# ustat
class SampleTooSmall(InputError):
    pass


class NonFiniteInput(InputError):
    pass


class IndexOutOfRange(InputError, IndexError):
    pass


# designs
class InvalidCorrelation(InputError):
    pass


class InfeasibleDesign(InputError):
    pass


class DegenerateDesign(InputError):
    pass


class DegenerateAuxiliary(NumericalError):
    pass


class PositivityViolation(NumericalError):
    pass


# elsolve
class NonConvergence(NumericalError):
    pass


class InfeasibleConstraint(NumericalError):
    """Zero is not an interior point of the convex hull of the constraint vectors."""


class SingularJacobian(NumericalError):
    pass


class BoundaryViolation(NumericalError):
    pass


# inference
class MissingWeights(InputError):
    pass


class DegenerateSample(NumericalError):
    pass


# harness / io
class SchemaError(InputError):
    pass


class ConfigError(InputError):
    pass
