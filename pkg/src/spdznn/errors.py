"""Abort and error types.

Every protocol abort is session-fatal. Each class carries a short
machine-readable ``category`` that the CLI prints on stderr.
"""

from __future__ import annotations


class ProtocolAbort(Exception):
    """A protocol detected misbehaviour or an unrecoverable condition."""

    category = "protocol-abort"

    def __init__(self, message: str, *, frame: str | None = None, detail=None):
        super().__init__(message)
        self.frame = frame
        self.detail = detail


class MacCheckFailure(ProtocolAbort):
    category = "mac-failure"

    def __init__(self, message: str = "MAC failure", **kw):
        super().__init__(message, **kw)


class SacrificeFailure(ProtocolAbort):
    category = "sacrifice-failure"

    def __init__(self, message: str = "triple sacrifice failed", **kw):
        super().__init__(message, **kw)


class MaterialDepleted(ProtocolAbort):
    category = "offline-depleted"

    def __init__(self, message: str = "offline material depleted", **kw):
        super().__init__(message, **kw)


class DecryptionAbort(ProtocolAbort):
    category = "decryption-abort"


class RandomBitAbort(ProtocolAbort):
    """Opened check a(1-a) was nonzero; ``detail`` lists the failing slots."""

    category = "random-bit-abort"


class CommitmentMismatch(ProtocolAbort):
    category = "commitment-mismatch"


class TransportFailure(ProtocolAbort):
    category = "transport-failure"

    def __init__(self, message: str = "transport failure", **kw):
        super().__init__(message, **kw)


class SessionAborted(ProtocolAbort):
    """Raised in a party whose peer aborted first."""

    category = "peer-abort"


class MaterialReuse(ValueError):
    """Single-use preprocessing material (triple, mask, dropout bits) used twice."""


class ConfigError(ValueError):
    category = "config-error"


class FormatError(ValueError):
    """Malformed key, store, wire or dataset bytes; ``offset`` locates the fault."""

    category = "format-error"

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
