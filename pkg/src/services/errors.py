"""Exception hierarchy shared by every BEAT service.

Outcomes that the ledger and orchestrator report as values (admission
rejections, NotDue, waitlisting) are not exceptions; these classes cover
misuse and invalid input.
"""

from typing import Optional


class BeatError(Exception):
    """Base class for all simulator errors"""


# Ledger

class InvalidTransaction(BeatError):
    pass


class RangeBeyondTip(BeatError):
    pass


class LedgerRejected(BeatError):
    def __init__(self, reason):
        self.reason = reason
        super().__init__(f"ledger rejected transaction: {getattr(reason, 'value', reason)}")


# Contracts

class InvalidParams(BeatError):
    pass


class Unauthorized(BeatError):
    pass


class UnknownContract(BeatError):
    pass


class AlreadyActive(BeatError):
    pass


class NotYetUsable(BeatError):
    pass


class InvalidSlaState(BeatError):
    pass


class DuplicateRecord(BeatError):
    pass


# Orchestration / network

class DuplicateLabel(BeatError):
    pass


class UnknownDevice(BeatError):
    pass


class UnknownLink(BeatError):
    pass


class DanglingLink(BeatError):
    pass


class DuplicateDeviceId(BeatError):
    pass


class NoPath(BeatError):
    pass


# Audit / governance

class AlreadyBlacklisted(BeatError):
    pass


class GovernanceNotConvened(BeatError):
    pass


# Inputs

class SpecParseError(BeatError):
    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field {field}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(f"{prefix}{message}")


class SpecValidationError(SpecParseError):
    """Well-formed TOML that breaks the scenario schema"""


class DumpParseError(BeatError):
    pass


class DisclosureParseError(BeatError):
    pass
