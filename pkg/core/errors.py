"""
Error Types for the Tracking Solvers
Every failure carries a machine-readable code and a CLI exit category
"""

CONFIG_ERROR = 2
SOLVER_ERROR = 3
LINEARIZING_ERROR = 4


class TrackingError(Exception):
    """Base class for all solver, model and config failures"""

    code = 'TrackingError'
    exit_code = SOLVER_ERROR

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_dict(self):
        return {'code': self.code, 'message': self.message}


class SingularGramError(TrackingError):
    code = 'SingularGram'


class InsufficientSamplesError(TrackingError):
    code = 'InsufficientSamples'
    exit_code = LINEARIZING_ERROR


class NotLinearizableError(TrackingError):
    code = 'NotLinearizable'
    exit_code = LINEARIZING_ERROR


class ShootingSingularError(TrackingError):
    code = 'ShootingSingular'


class IntegratorFailureError(TrackingError):
    code = 'IntegratorFailure'


class NotTwoDimClassError(TrackingError):
    code = 'NotTwoDimClass'


class VanishingBError(TrackingError):
    code = 'VanishingB'


class NoDecayError(TrackingError):
    code = 'NoDecay'


class NonHyperbolicError(TrackingError):
    code = 'NonHyperbolic'


class NotSupportedError(TrackingError):
    code = 'NotSupported'


class MatchingFailureError(TrackingError):
    code = 'MatchingFailure'


class NewtonDivergedError(TrackingError):
    code = 'NewtonDiverged'


class GridMismatchError(TrackingError):
    code = 'GridMismatch'


class HorizonTooShortError(TrackingError):
    code = 'HorizonTooShort'


class NotMechanicalFormError(TrackingError):
    code = 'NotMechanicalForm'
    exit_code = CONFIG_ERROR


class ExpressionParseError(TrackingError):
    code = 'ExpressionParseError'
    exit_code = CONFIG_ERROR

    def __init__(self, message: str, position: int = -1):
        if position >= 0:
            message = f"{message} (at character {position})"
        super().__init__(message)
        self.position = position


class ParseError(TrackingError):
    """Config file problem; `field` is a dotted path into the JSON document"""

    code = 'ParseError'
    exit_code = CONFIG_ERROR

    def __init__(self, message: str, field: str = '', line: int = 0):
        where = []
        if field:
            where.append(f"field '{field}'")
        if line:
            where.append(f"line {line}")
        if where:
            message = f"{message} [{', '.join(where)}]"
        super().__init__(message)
        self.field = field
        self.line = line


class DimensionMismatchError(ParseError):
    code = 'DimensionMismatch'


class OutputError(TrackingError):
    code = 'IoError'
    exit_code = CONFIG_ERROR
