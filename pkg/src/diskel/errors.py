"""Exception hierarchy shared across the toolkit.

ValidationError subclasses indicate bad user input (CLI exit code 2);
ComputeError subclasses indicate a computation that could not complete
on otherwise valid input (CLI exit code 1).
"""


class DiskelError(Exception):
    pass


class ValidationError(DiskelError):
    pass


class ParseError(ValidationError):
    pass


class EmptyShape(ValidationError):
    pass


class MultipleComponents(ValidationError):
    pass


class HasHoles(ValidationError):
    pass


class NoShapes(ValidationError):
    pass


class UnlabeledEntry(ValidationError):
    pass


class ComputeError(DiskelError):
    pass


class NonConvergence(ComputeError):
    pass


class DegenerateSkeleton(ComputeError):
    pass


class NoNeighbors(ComputeError):
    pass


class NoMajorNegative(ComputeError):
    pass


class SingularBasis(ComputeError):
    pass


class DegenerateSet(ComputeError):
    pass


class SingularSystem(ComputeError):
    pass


class MissingQuadWarning(UserWarning):
    """A matched protrusion branch has no indentation neighbours; its
    weight is left unrevised during articulated scoring."""
