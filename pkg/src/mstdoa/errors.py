"""Exception hierarchy shared by the library and the CLI."""


class MstDoaError(Exception):
    """Base class for all package errors."""


class DomainError(MstDoaError, ValueError):
    """An angle or size lies outside its admissible range."""


class DegenerateDSTError(MstDoaError, ValueError):
    """The two polarization vectors of a DST source are parallel."""


class ConfigurationError(MstDoaError, ValueError):
    """A scenario or estimator configuration is inconsistent."""


class ScenarioFileError(ConfigurationError):
    """A scenario file could not be parsed; carries the field and line."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class NumericalError(MstDoaError, ArithmeticError):
    """A computation could not produce a meaningful result."""


class AmbiguousPolarizationError(NumericalError):
    """Polarization requested at a direction whose test matrix has rank 0."""


class NonIdentifiableError(NumericalError):
    """The Fisher information matrix is singular."""
