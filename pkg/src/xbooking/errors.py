"""Exception hierarchy shared across the package."""
from __future__ import annotations

from typing import Optional


class XBError(Exception):
    """Base class for all package errors."""


# -- ingestion -------------------------------------------------------------

class NotFound(XBError):
    pass


class TransportError(XBError):
    pass


class CacheWriteError(XBError):
    pass


class ParseError(XBError):
    def __init__(self, message: str, *, source: str = "", offset: Optional[int] = None,
                 field: str = ""):
        self.source = source
        self.offset = offset
        self.field = field
        parts = [message]
        if source:
            parts.append(f"source={source}")
        if field:
            parts.append(f"field={field}")
        if offset is not None:
            parts.append(f"byte_offset={offset}")
        super().__init__(" ".join(parts))


class UnknownFoul(XBError):
    pass


# -- modelling -------------------------------------------------------------

class DegenerateLabels(XBError):
    pass


class PresetUnsatisfiable(XBError):
    pass


class TooSmall(XBError):
    pass


class SchemaMismatch(XBError):
    pass


class EmptyDataset(XBError):
    pass


class SingleClass(XBError):
    pass


class NonConvergence(XBError):
    def __init__(self, message: str, grad_norm: float):
        self.grad_norm = grad_norm
        super().__init__(f"{message} (final gradient norm {grad_norm:.3e})")


class VersionMismatch(XBError):
    pass


class CorruptModel(XBError):
    pass


# -- analytics -------------------------------------------------------------

class OrphanFoul(XBError):
    pass


class UnknownAxis(XBError):
    pass


class IoError(XBError):
    pass


class ConfigError(XBError):
    """Invalid run configuration; maps to CLI exit code 2."""
