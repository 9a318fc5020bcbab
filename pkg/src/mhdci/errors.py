"""Exception hierarchy shared by every module.

Each class carries the process exit code the command line front end should
use when the error escapes a subcommand.
"""


class MhdciError(Exception):
    exit_code = 1


class SchemaError(MhdciError):
    exit_code = 2


class NotInRelaxedSet(MhdciError):
    exit_code = 3

    def __init__(self, message, inequality=None):
        super().__init__(message)
        self.inequality = inequality


class NotSimple(MhdciError):
    pass


class NotInCone(MhdciError):
    pass


class InvalidSegment(MhdciError):
    pass


class DegenerateProjection(MhdciError):
    pass


class ZeroVector(MhdciError):
    pass


class SegmentNotInM(MhdciError):
    pass


class BadCertificate(MhdciError):
    pass


class OutOfRange(MhdciError):
    pass


class NotScaledK(MhdciError):
    pass


class AtomOnBoundary(MhdciError):
    pass


class DepthExceeded(MhdciError):
    pass


class BadParams(MhdciError):
    pass


class NotInKernel(MhdciError):
    pass


class BadSegment(MhdciError):
    pass


class FrequencyTooLow(MhdciError):
    pass


class CoverFailure(MhdciError):
    pass


class ResolutionExceeded(MhdciError):
    pass


class NotSubsolution(MhdciError):
    pass


class NotSolenoidal(MhdciError):
    pass


class NonzeroMean(MhdciError):
    pass


class ResidualTooLarge(MhdciError):
    pass


class CFLViolation(MhdciError):
    pass
