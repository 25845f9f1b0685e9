"""Exception hierarchy shared by every chainseg module."""


class ChainsegError(Exception):
    """Base class for domain errors (mapped to exit code 1 by the CLI)."""


# contour geometry
class InvalidContour(ChainsegError):
    pass


class CenterOutside(ChainsegError):
    pass


class NoIntersection(ChainsegError):
    pass


class Degenerate(ChainsegError):
    pass


# loss
class SingularDenominator(ChainsegError):
    pass


# metrics
class ZeroUnion(ChainsegError):
    pass


class EmptySet(ChainsegError):
    pass


# dataset
class ParseError(ChainsegError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class TooFewPoints(ChainsegError):
    pass


class InvalidSpec(ChainsegError):
    pass


class NestingViolation(ChainsegError):
    pass


# predictor
class InvalidDescriptor(ChainsegError):
    pass


class ShapeMismatch(ChainsegError):
    pass


class StaleCache(ChainsegError):
    pass


class BadMagic(ChainsegError):
    pass


class VersionMismatch(ChainsegError):
    pass


class TruncatedFile(ChainsegError):
    pass


# trainer
class NonFiniteLoss(ChainsegError):
    pass
