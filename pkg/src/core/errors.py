"""
Exception hierarchy for the boson sampling toolkit
"""


class BsbmError(ValueError):
    """Base class for every toolkit error"""


# combinatorics
class RankOutOfRange(BsbmError):
    pass


class EnumerationTooLarge(BsbmError):
    pass


class InE1(BsbmError):
    """Outcome has its last mode occupied, so it has no skip rank"""


# interferometer
class ShrinkNotAllowed(BsbmError):
    pass


class DimensionMismatch(BsbmError):
    pass


class NonUnitaryMatrix(BsbmError):
    pass


class DecompositionError(BsbmError):
    pass


# permanent / born machine
class MatrixTooLarge(BsbmError):
    pass


class NonRealExpectation(BsbmError):
    pass


class FixedUnitaryHasNoGradient(BsbmError):
    pass


class ZeroCollisionFreeMass(BsbmError):
    """All output mass sits on collision outcomes, so postselection is undefined"""


# readout
class CodomainTooSmall(BsbmError):
    pass


class SizePreconditionViolated(BsbmError):
    pass


class EmptyPreimage(BsbmError):
    pass


class InfeasibleBase(BsbmError):
    pass


# training
class LengthMismatch(BsbmError):
    pass


class SpaceTooLarge(BsbmError):
    pass


# command line
class ConfigError(BsbmError):
    """Invalid run configuration; ``key`` names the offending setting"""

    def __init__(self, message: str, key: str = ""):
        super().__init__(message)
        self.key = key


class DataError(BsbmError):
    """Unreadable or malformed dataset / checkpoint"""
