"""Canonical zone-level event schema and trace ingestion.

Wire format: one JSON object per line (UTF-8), field names exactly
ts_ns, layer, op, addr, len, zone, attrs. Absent fields may be omitted.
The same framing carries violation reports and timeline records.
"""

import json
from dataclasses import dataclass, field

from .errors import IntegrityError, ParseError, RangeError

LAYER_APP = "APP"
LAYER_FS = "FS"
LAYER_DEV = "DEV"
LAYERS = (LAYER_APP, LAYER_FS, LAYER_DEV)

READ = "READ"
WRITE = "WRITE"
APPEND = "APPEND"
RESET = "RESET"
OPEN = "OPEN"
CLOSE = "CLOSE"
FINISH = "FINISH"
OFFLINE = "OFFLINE"
FLUSH = "FLUSH"
COMPACTION_BEGIN = "COMPACTION_BEGIN"
COMPACTION_END = "COMPACTION_END"
FILE_CREATE = "FILE_CREATE"
FILE_DELETE = "FILE_DELETE"
FSYNC = "FSYNC"
UNKNOWN_ZONE_ACTION = "UNKNOWN_ZONE_ACTION"

DATA_OPS = frozenset({READ, WRITE, APPEND})
ZONE_MGMT_OPS = frozenset({RESET, OPEN, CLOSE, FINISH, OFFLINE})
APP_OPS = frozenset({
    FLUSH, COMPACTION_BEGIN, COMPACTION_END, FILE_CREATE, FILE_DELETE, FSYNC,
    READ, WRITE,
})
ALL_OPS = DATA_OPS | ZONE_MGMT_OPS | APP_OPS | {UNKNOWN_ZONE_ACTION}

# NVMe Zone Send Action codes, used when the block layer reports a
# passthrough request (REQ_OP_DRV_OUT) instead of a typed zone op.
_ZSA_CODES = {1: CLOSE, 2: FINISH, 3: OPEN, 4: RESET, 5: OFFLINE}
_ZSA_NAMES = {
    "close": CLOSE, "finish": FINISH, "open": OPEN, "reset": RESET,
    "offline": OFFLINE, "reset_zone": RESET, "open_zone": OPEN,
    "close_zone": CLOSE, "finish_zone": FINISH,
}
_PASSTHROUGH_TOKENS = frozenset({"DRV_OUT", "REQ_OP_DRV_OUT", "DRV_IN", "REQ_OP_DRV_IN"})

DEFAULT_SKEW_NS = 1_000_000  # 1ms multi-source clock jitter budget


@dataclass(frozen=True, slots=True)
class TraceEvent:
    ts_ns: int
    layer: str
    op: str
    addr: int | None = None
    length: int | None = None
    zone: int | None = None
    attrs: dict = field(default_factory=dict)

    def to_record(self):
        rec = {"ts_ns": self.ts_ns, "layer": self.layer, "op": self.op}
        if self.addr is not None:
            rec["addr"] = self.addr
        if self.length is not None:
            rec["len"] = self.length
        if self.zone is not None:
            rec["zone"] = self.zone
        if self.attrs:
            rec["attrs"] = self.attrs
        return rec

    def to_line(self):
        return json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"))


def classify_passthrough(op_token, action=None):
    """Map a raw driver op plus zone-send action onto a canonical op.

    Passthrough tokens (REQ_OP_DRV_OUT and friends) are resolved through the
    zone management action code or name; anything else maps directly.
    Unknown actions come back as UNKNOWN_ZONE_ACTION, kept as opaque events.
    """
    token = str(op_token).strip()
    if token.upper() not in _PASSTHROUGH_TOKENS:
        op = token.upper()
        if op not in ALL_OPS:
            raise ParseError(f"unknown op token {op_token!r}")
        return op
    if action is None:
        return UNKNOWN_ZONE_ACTION
    if isinstance(action, int):
        return _ZSA_CODES.get(action, UNKNOWN_ZONE_ACTION)
    text = str(action).strip().lower()
    if text in _ZSA_NAMES:
        return _ZSA_NAMES[text]
    try:
        code = int(text, 0)
    except ValueError:
        return UNKNOWN_ZONE_ACTION
    return _ZSA_CODES.get(code, UNKNOWN_ZONE_ACTION)


_KNOWN_KEYS = frozenset({"ts_ns", "layer", "op", "addr", "len", "zone", "attrs"})


def parse_line(line, geometry, line_no=None):
    """Parse and validate one canonical record against the device geometry."""
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad record: {exc}", line_no=line_no, line=line) from None
    if not isinstance(rec, dict):
        raise ParseError("record is not an object", line_no=line_no, line=line)
    unknown = set(rec) - _KNOWN_KEYS
    if unknown:
        raise ParseError(f"unknown fields: {sorted(unknown)}", line_no=line_no)

    try:
        ts_ns = int(rec["ts_ns"])
        layer = str(rec["layer"])
        op_token = str(rec["op"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"missing/invalid required field: {exc}", line_no=line_no) from None
    if layer not in LAYERS:
        raise ParseError(f"unknown layer {layer!r}", line_no=line_no)

    attrs = rec.get("attrs") or {}
    if not isinstance(attrs, dict):
        raise ParseError("attrs must be an object", line_no=line_no)
    attrs = {str(k): str(v) for k, v in attrs.items()}

    op = classify_passthrough(op_token, attrs.get("zsa", attrs.get("action")))

    addr = rec.get("addr")
    length = rec.get("len")
    zone = rec.get("zone")
    addr = None if addr is None else int(addr)
    length = None if length is None else int(length)
    zone = None if zone is None else int(zone)

    if layer in (LAYER_APP, LAYER_FS):
        if op not in APP_OPS:
            raise ParseError(f"op {op} not valid at layer {layer}", line_no=line_no)
        if addr is not None:
            raise ParseError(f"{layer} events carry no addr", line_no=line_no)
        return TraceEvent(ts_ns, layer, op, None, length, None, attrs)

    # DEV layer
    if op in DATA_OPS:
        if addr is None or length is None:
            raise ParseError(f"DEV {op} requires addr and len", line_no=line_no)
        if length <= 0:
            raise ParseError(f"len must be positive, got {length}", line_no=line_no)
        try:
            geometry.check_addr(addr)
            geometry.check_addr(addr + length - 1, what="end of request")
        except RangeError as exc:
            raise RangeError(f"line {line_no}: {exc}") from None
        derived = addr // geometry.zone_size
        if zone is not None and zone != derived:
            raise IntegrityError(
                f"line {line_no}: zone field {zone} disagrees with "
                f"addr-derived zone {derived}")
        return TraceEvent(ts_ns, layer, op, addr, length, derived, attrs)

    if op in ZONE_MGMT_OPS or op == UNKNOWN_ZONE_ACTION:
        if zone is None and addr is not None:
            geometry.check_addr(addr)
            zone = addr // geometry.zone_size
        if zone is None:
            if op == UNKNOWN_ZONE_ACTION:
                return TraceEvent(ts_ns, layer, op, addr, length, None, attrs)
            raise ParseError(f"DEV {op} requires zone (or addr)", line_no=line_no)
        if not 0 <= zone < geometry.nr_zones:
            raise RangeError(
                f"line {line_no}: zone {zone} outside [0, {geometry.nr_zones})")
        if addr is not None:
            derived = addr // geometry.zone_size
            if derived != zone:
                raise IntegrityError(
                    f"line {line_no}: zone field {zone} disagrees with "
                    f"addr-derived zone {derived}")
        return TraceEvent(ts_ns, layer, op, addr, length, zone, attrs)

    raise ParseError(f"op {op} not valid at layer DEV", line_no=line_no)


def ingest(lines, geometry, skew_tolerance_ns=DEFAULT_SKEW_NS):
    """Parse a canonical trace stream into validated, time-ordered events.

    Timestamps may jitter backwards by up to skew_tolerance_ns (multi-source
    capture); such events are stably re-sorted. Larger skew means a broken
    capture and raises.
    """
    if isinstance(lines, str):
        lines = lines.splitlines()
    events = []
    high = None
    sorted_so_far = True
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        ev = parse_line(line, geometry, line_no=line_no)
        if high is not None and ev.ts_ns < high:
            if high - ev.ts_ns > skew_tolerance_ns:
                raise IntegrityError(
                    f"line {line_no}: timestamp {ev.ts_ns} precedes stream high "
                    f"water {high} by more than {skew_tolerance_ns}ns")
            sorted_so_far = False
        if high is None or ev.ts_ns > high:
            high = ev.ts_ns
        events.append(ev)
    if not sorted_so_far:
        events.sort(key=lambda e: e.ts_ns)  # stable: equal ts keep stream order
    return events


def load_trace(path, geometry, skew_tolerance_ns=DEFAULT_SKEW_NS):
    with open(path, "r", encoding="utf-8") as fh:
        return ingest(fh, geometry, skew_tolerance_ns)


def write_trace(path, events):
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(ev.to_line())
            fh.write("\n")
