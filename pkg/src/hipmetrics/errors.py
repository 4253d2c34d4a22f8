"""Exception and warning types shared across the package."""


class HipmetricsError(Exception):
    """Base class for all package-specific errors."""


class DegenerateGeometry(HipmetricsError):
    """Coincident landmarks or zero-height constructions."""


class InvalidRatio(HipmetricsError):
    """Negative or non-finite displacement ratio."""


class InvalidTarget(HipmetricsError):
    """Synthetic target tuple outside the representable ranges."""


class InvalidNoiseRate(HipmetricsError):
    """Label noise rate outside [0, 0.5)."""


class DegenerateDataset(HipmetricsError):
    """Fitting dataset contains a single class; agreement is undefined."""


class InvalidScale(HipmetricsError):
    """Non-positive object scale or keypoint constant."""


class InsufficientRedundancy(HipmetricsError):
    """No keypoint has two or more repeated annotations anywhere."""


class DegenerateConstant(HipmetricsError):
    """Estimated keypoint constant is zero; the similarity is undefined."""


class EmptyGroundTruth(HipmetricsError):
    """Evaluation requested against an empty reference set."""


class DegenerateAgreement(HipmetricsError):
    """Chance agreement is 1; kappa is undefined."""


class DegenerateVariance(HipmetricsError):
    """All ratings identical; the correlation is undefined."""


class InsufficientData(HipmetricsError):
    """Fewer observations than the statistic requires."""


class OutOfBounds(HipmetricsError):
    """Keypoint location falls outside the mask grid."""


class InvalidSigma(HipmetricsError):
    """Non-positive spread for a soft mask."""


class InvalidProbability(HipmetricsError):
    """Predicted probability not strictly inside (0, 1)."""


class SchemaError(HipmetricsError):
    """Malformed annotation document; message carries the field path."""


class MissingKeypoint(SchemaError):
    """A named landmark is absent from an annotation document."""


class NoMajorityWarning(UserWarning):
    """Diagnosis vote tied; the fused label falls back to "other"."""
