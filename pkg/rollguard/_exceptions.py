from typing import Optional


class RollguardException(Exception):
    pass


class HardwareRootError(RollguardException):
    pass


class StorageError(RollguardException):
    pass


class PadError(RollguardException):
    pass


class TamperDetected(RollguardException):
    """Authenticated data on untrusted storage failed verification."""

    def __init__(self, message: str, pad: Optional[str] = None, index: Optional[int] = None):
        super().__init__(message)
        self.pad = pad
        self.index = index


class IntegrityViolation(RollguardException):
    pass


class BlobNotFound(RollguardException):
    pass


class ReclaimRejected(RollguardException):
    pass


class RequestInvalid(RollguardException):
    pass


class PolicyViolation(RollguardException):
    pass


class EligibilityError(RollguardException):
    reason = "ineligible"


class DeAuthorized(EligibilityError):
    reason = "de-authorized"


class DuplicateTag(EligibilityError):
    reason = "duplicate-tag"


class UnknownObject(EligibilityError):
    reason = "unknown-object"


class UnknownVersion(EligibilityError):
    reason = "unknown-version"


class UnknownSnapshot(EligibilityError):
    reason = "unknown-snapshot"


class AlreadyPruned(EligibilityError):
    reason = "already-pruned"


class NoLiveHead(EligibilityError):
    reason = "no-live-head"


class RecoveryRequired(RollguardException):
    def __init__(self, message: str, kind: str = "uncommitted"):
        super().__init__(message)
        self.kind = kind


class StaleStateDetected(RecoveryRequired):
    def __init__(self, message: str):
        super().__init__(message, kind="behind")


class RecoveryHalted(RollguardException):
    pass


class SimulatedCrash(BaseException):
    def __init__(self, hook: str):
        super().__init__(f"simulated crash at '{hook}'")
        self.hook = hook
