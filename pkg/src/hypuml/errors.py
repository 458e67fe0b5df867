"""Exception hierarchy shared by every hypuml module."""


class HypUMLError(Exception):
    """Base class for all library errors."""


class GeometryError(HypUMLError):
    pass


class BoundaryViolation(GeometryError):
    pass


class DenominatorUnderflow(GeometryError):
    pass


class NonFiniteInput(GeometryError):
    pass


class CurvatureMismatch(GeometryError):
    pass


class UnknownPrimitive(HypUMLError, KeyError):
    pass


class StepTooSmall(HypUMLError, ValueError):
    pass


class BatchError(HypUMLError, ValueError):
    pass


class EmptyBatch(BatchError):
    pass


class NoPositivePairs(BatchError):
    pass


class NoValidTriplets(BatchError):
    pass


class DimensionMismatch(HypUMLError, ValueError):
    pass


class ShapeMismatch(HypUMLError, ValueError):
    pass


class InsufficientClasses(BatchError):
    pass


class InsufficientSamples(BatchError):
    pass


class LabelLengthMismatch(HypUMLError, ValueError):
    pass


class TrainingDiverged(HypUMLError, RuntimeError):
    pass


class FormatError(HypUMLError):
    """A file on disk does not match its binary layout."""


class IoError(HypUMLError, OSError):
    pass


class BadMagic(FormatError):
    pass


class VersionMismatch(FormatError):
    pass


class ChecksumMismatch(FormatError):
    pass


class SplitError(HypUMLError, ValueError):
    pass


class UnknownClass(SplitError):
    pass


class DimensionNotPlottable(HypUMLError, ValueError):
    pass
