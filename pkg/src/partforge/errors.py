"""Error taxonomy shared by every pipeline layer.

Each error carries a stable ``code`` string that the HTTP service and CLI
propagate verbatim, so callers can match on codes instead of messages.
"""

from __future__ import annotations


class PartForgeError(Exception):
    """Base class; ``code`` identifies the error across API boundaries."""

    code = "Error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# -- job model ---------------------------------------------------------------

class DuplicatePartId(PartForgeError):
    code = "DuplicatePartId"


class EmptyPartList(PartForgeError):
    code = "EmptyPartList"


class ImageDecodeError(PartForgeError):
    code = "ImageDecodeError"


class IllegalTransition(PartForgeError):
    code = "IllegalTransition"


class UnknownStage(PartForgeError):
    code = "UnknownStage"


class StoreCorrupt(PartForgeError):
    code = "StoreCorrupt"


class JobNotFound(PartForgeError):
    code = "JobNotFound"


# -- prompt engine -----------------------------------------------------------

class NoJsonBlock(PartForgeError):
    code = "NoJsonBlock"


class SchemaViolation(PartForgeError):
    code = "SchemaViolation"

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(message or f"schema violation in field '{field}'")


class PartIdMismatch(PartForgeError):
    code = "PartIdMismatch"

    def __init__(self, missing=(), extra=()):
        self.missing = sorted(missing)
        self.extra = sorted(extra)
        super().__init__(f"part ids mismatch (missing={self.missing}, extra={self.extra})")


class ImmutableField(PartForgeError):
    code = "ImmutableField"

    def __init__(self, field: str):
        self.field = field
        super().__init__(f"field '{field}' is immutable")


# -- backends ----------------------------------------------------------------

class BackendTimeout(PartForgeError):
    code = "Timeout"


class HttpStatus(PartForgeError):
    code = "HttpStatus"

    def __init__(self, status: int, attempts: int = 1, message: str = ""):
        self.status = status
        self.attempts = attempts
        super().__init__(message or f"backend returned HTTP {status} after {attempts} attempt(s)")


class PayloadTooLarge(PartForgeError):
    code = "PayloadTooLarge"


class ContentRefused(PartForgeError):
    code = "ContentRefused"


class TileDecodeError(PartForgeError):
    code = "TileDecodeError"


# -- geometry / numerics -----------------------------------------------------

class BadRange(PartForgeError):
    code = "BadRange"


class ShapeMismatch(PartForgeError):
    code = "ShapeMismatch"


class BehindCamera(PartForgeError):
    code = "BehindCamera"


class OutOfBounds(PartForgeError):
    code = "OutOfBounds"


class DimensionMismatch(PartForgeError):
    code = "DimensionMismatch"


class RigMismatch(PartForgeError):
    code = "RigMismatch"


class EmptyGrid(PartForgeError):
    code = "EmptyGrid"


class UnsupportedFormat(PartForgeError):
    code = "UnsupportedFormat"


# -- assembly ----------------------------------------------------------------

class EmptyMask(PartForgeError):
    code = "EmptyMask"


class NoOverlap(PartForgeError):
    code = "NoOverlap"


class MissingTransform(PartForgeError):
    code = "MissingTransform"


# -- service -----------------------------------------------------------------

class BindError(PartForgeError):
    code = "BindError"
