"""Exception hierarchy.

Validation problems (bad inputs, bad geometry) derive from
:class:`ValidationError`; failures of a numerical procedure on valid input
derive from :class:`NumericalError`. The CLI maps the two families to
different exit codes.
"""


class TrapforgeError(Exception):
    pass


class ValidationError(TrapforgeError, ValueError):
    pass


class GeometryError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class DomainError(ValidationError):
    """Evaluation requested outside the domain of a formula."""


class NumericalError(TrapforgeError, RuntimeError):
    pass


class NullNotFoundError(NumericalError):
    pass


class AmbiguousNullError(NumericalError):
    def __init__(self, message, candidates):
        super().__init__(message)
        self.candidates = tuple(candidates)


class NotAMinimumError(NumericalError):
    pass


class UnboundedSearchError(NumericalError):
    pass


class TrackingError(NumericalError):
    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


class NonFiniteObjectiveError(NumericalError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point
