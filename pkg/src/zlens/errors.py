"""Exception hierarchy shared across the toolkit.

Exit-code mapping used by the CLI: InputError and subclasses exit 1,
argparse usage errors exit 2, contract violations exit 3.
"""


class ZlensError(Exception):
    """Base class for all toolkit errors."""


class InputError(ZlensError):
    """Bad input data: unparseable, inconsistent, or out of range."""


class ParseError(InputError):
    def __init__(self, message, line_no=None, line=None):
        self.line_no = line_no
        self.line = line
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class IntegrityError(InputError):
    """Inputs parse but contradict each other or themselves."""


class RangeError(InputError):
    """An address or index falls outside the device/table span."""


class UnsupportedError(InputError):
    """On-disk layout variant the parser deliberately does not handle."""


class NotF2FSError(InputError):
    """Neither superblock copy carries the F2FS magic."""


class EmptyFigureError(ZlensError):
    """Nothing to render (zero zones / empty input)."""


# Zone state-machine rejection codes.
UNALIGNED_WRITE = "UNALIGNED_WRITE"
ZONE_BOUNDARY = "ZONE_BOUNDARY"
ZONE_INACCESSIBLE = "ZONE_INACCESSIBLE"
TOO_MANY_OPEN = "TOO_MANY_OPEN"
INVALID_TRANSITION = "INVALID_TRANSITION"


class ZoneCommandError(ZlensError):
    """A zone command rejected by the device state machine."""

    def __init__(self, code, message):
        self.code = code
        self.message = message
        super().__init__(f"{code}: {message}")
