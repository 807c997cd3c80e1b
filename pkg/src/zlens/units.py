"""Byte-size parsing/formatting and the shared key=value file reader."""

from .errors import ParseError

KiB = 1024
MiB = 1024 * KiB
GiB = 1024 * MiB

_SUFFIXES = {
    "": 1,
    "b": 1,
    "k": KiB, "kib": KiB,
    "m": MiB, "mib": MiB,
    "g": GiB, "gib": GiB,
    "t": 1024 * GiB, "tib": 1024 * GiB,
}


def parse_size(text):
    """Parse '4096', '64MiB', '4k' ... into bytes."""
    s = str(text).strip()
    i = len(s)
    while i > 0 and not s[i - 1].isdigit():
        i -= 1
    digits, suffix = s[:i], s[i:].strip().lower()
    if not digits or suffix not in _SUFFIXES:
        raise ParseError(f"cannot parse size {text!r}")
    return int(digits) * _SUFFIXES[suffix]


def format_size(n):
    """Render a byte count using the largest exact IEC unit."""
    for unit, width in (("GiB", GiB), ("MiB", MiB), ("KiB", KiB)):
        if n and n % width == 0:
            return f"{n // width}{unit}"
    return str(n)


def read_kv(lines, path=None):
    """Read `key = value` lines ('#' comments, blanks ignored) into a dict.

    Duplicate keys are an error: these files configure runs and silent
    last-one-wins hides typos.
    """
    out = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {raw!r}", line_no=line_no)
        key, value = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise ParseError(f"duplicate key {key!r}", line_no=line_no)
        out[key] = value.strip()
    return out


def read_kv_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return read_kv(fh, path=path)
