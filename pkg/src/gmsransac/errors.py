"""Exception types raised across the pipeline."""


class GmsRansacError(Exception):
    pass


class MalformedHeader(GmsRansacError, ValueError):
    pass


class TruncatedData(GmsRansacError, ValueError):
    pass


class UnsupportedMaxval(GmsRansacError, ValueError):
    pass


class ImageLoadError(GmsRansacError, OSError):
    pass


class SingularHomography(GmsRansacError, ValueError):
    pass


class ImageTooSmall(GmsRansacError, ValueError):
    pass


class PatchOutOfBounds(GmsRansacError, ValueError):
    pass


class PointOutOfBounds(GmsRansacError, ValueError):
    pass


class LengthMismatch(GmsRansacError, ValueError):
    pass


class DegenerateSample(GmsRansacError, ValueError):
    pass


class NumericalFailure(GmsRansacError, ArithmeticError):
    pass


class TooFewMatches(GmsRansacError, ValueError):
    pass


class NoValidModel(GmsRansacError, RuntimeError):
    pass


class ConfigError(GmsRansacError, ValueError):
    pass
