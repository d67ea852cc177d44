"""Exception hierarchy shared by every vecsect module."""


class VecsectError(Exception):
    """Base class for all errors raised by vecsect."""


class InvalidArgumentError(VecsectError, ValueError):
    """An argument violates a precondition (shape, range, ordering)."""


class UnsupportedGeometryError(VecsectError):
    """The requested operation has no implementation for this geometry."""


class UnsupportedCapabilityError(VecsectError):
    """The executing CPU cannot run the requested implementation."""


class ValidationError(VecsectError):
    """A run file or CLI input is malformed.

    ``offset`` is the byte offset of the offending data when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
