"""Exception and warning types raised across the package."""


class NormnetError(ValueError):
    """Base class for all input and numerical errors raised by normnet."""


# distributions
class InfeasibleMoments(NormnetError):
    pass


class DegenerateDenominator(NormnetError):
    pass


# samples and features
class ConstantSample(NormnetError):
    pass


class InvalidProbability(NormnetError):
    pass


class DegenerateCorrelation(NormnetError):
    pass


class ZeroSpacing(NormnetError):
    pass


class InvalidWindow(NormnetError):
    pass


# tests
class SampleTooSmall(NormnetError):
    pass


class SampleTooLarge(NormnetError):
    pass


class ZeroBandwidth(NormnetError):
    pass


class NumericalOverflow(RuntimeWarning):
    """Emitted when a CDF value had to be clamped away from 0 or 1."""


# neural network
class DimensionMismatch(NormnetError):
    pass


class SingleClassData(NormnetError):
    pass


class EmptyDataset(NormnetError):
    pass


# datasets
class InfeasibleSpec(NormnetError):
    pass


class MalformedCsv(NormnetError):
    pass


class MissingColumn(NormnetError):
    pass


class CatalogTooSmall(NormnetError):
    pass


class FormatVersionMismatch(NormnetError):
    pass


# evaluation
class LengthMismatch(NormnetError):
    pass


class SingleClassLabels(NormnetError):
    pass


class TooFewPoints(NormnetError):
    pass
