"""ZNS per-zone state machine and deterministic workload simulator.

Device state is a value: apply() returns a new state. The simulator tracks
addresses and conditions only, never data bytes.
"""

from dataclasses import dataclass

from . import trace
from .errors import (
    INVALID_TRANSITION,
    TOO_MANY_OPEN,
    UNALIGNED_WRITE,
    ZONE_BOUNDARY,
    ZONE_INACCESSIBLE,
    ParseError,
    RangeError,
    ZoneCommandError,
)
from .units import parse_size

EMPTY = "EMPTY"
IMPLICIT_OPEN = "IMPLICIT_OPEN"
EXPLICIT_OPEN = "EXPLICIT_OPEN"
CLOSED = "CLOSED"
FULL = "FULL"
READ_ONLY = "READ_ONLY"
OFFLINE = "OFFLINE"
CONDITIONS = (EMPTY, IMPLICIT_OPEN, EXPLICIT_OPEN, CLOSED, FULL, READ_ONLY, OFFLINE)

_OPEN_CONDS = (IMPLICIT_OPEN, EXPLICIT_OPEN)

WRITE = "write"
APPEND = "append"
READ = "read"
RESET = "reset"
OPEN = "open"
CLOSE = "close"
FINISH = "finish"
COMMAND_OPS = (WRITE, APPEND, READ, RESET, OPEN, CLOSE, FINISH)

_ZONE_OPS = (APPEND, RESET, OPEN, CLOSE, FINISH)
_EVENT_OP = {
    WRITE: trace.WRITE, APPEND: trace.APPEND, READ: trace.READ,
    RESET: trace.RESET, OPEN: trace.OPEN, CLOSE: trace.CLOSE,
    FINISH: trace.FINISH,
}


@dataclass(frozen=True, slots=True)
class ZoneState:
    index: int
    start: int
    write_pointer: int
    condition: str = EMPTY
    reset_count: int = 0


@dataclass(frozen=True, slots=True)
class Command:
    """One simulator command.

    write carries addr when driven at the state-machine level; script-level
    writes name a zone and resolve to that zone's write pointer.
    read carries addr. append and the management ops name a zone.
    """
    op: str
    zone: int | None = None
    addr: int | None = None
    length: int | None = None
    ts_ns: int = 0


@dataclass(frozen=True, slots=True)
class DeviceState:
    geometry: object
    zones: tuple
    open_zones: int = 0

    def zone(self, index):
        return self.zones[index]


def new_device(geometry, conditions=None):
    """Fresh device, all zones EMPTY unless an initial condition map is given
    (READ_ONLY / OFFLINE zones for fault tests)."""
    zones = []
    for i in range(geometry.nr_zones):
        start = i * geometry.zone_size
        cond = EMPTY if conditions is None else conditions.get(i, EMPTY)
        if cond not in (EMPTY, READ_ONLY, OFFLINE, FULL):
            raise ZoneCommandError(INVALID_TRANSITION,
                                   f"cannot seed zone {i} as {cond}")
        wp = start + geometry.zone_capacity if cond == FULL else start
        zones.append(ZoneState(i, start, wp, cond))
    return DeviceState(geometry, tuple(zones), 0)


def _check_zone_index(geometry, zone):
    if zone is None or not 0 <= zone < geometry.nr_zones:
        raise RangeError(f"zone {zone} outside [0, {geometry.nr_zones})")


def _budget(geometry, open_count):
    limit = geometry.max_open_zones
    if limit is not None and open_count + 1 > limit:
        raise ZoneCommandError(
            TOO_MANY_OPEN, f"{open_count} zones open, limit {limit}")


def _apply_mut(geometry, zones, open_count, cmd):
    """Shared transition core. Mutates the zones list; returns
    (open_count, result_addr, zone_index)."""
    op = cmd.op
    cap = geometry.zone_capacity

    if op == READ:
        if cmd.addr is None or cmd.length is None or cmd.length <= 0:
            raise ZoneCommandError(INVALID_TRANSITION, "read requires addr and len")
        geometry.check_addr(cmd.addr)
        geometry.check_addr(cmd.addr + cmd.length - 1, what="end of read")
        zi = cmd.addr // geometry.zone_size
        if zones[zi].condition == OFFLINE:
            raise ZoneCommandError(ZONE_INACCESSIBLE, f"read in OFFLINE zone {zi}")
        return open_count, cmd.addr, zi

    if op == WRITE:
        if cmd.addr is not None:
            geometry.check_addr(cmd.addr)
            zi = cmd.addr // geometry.zone_size
        else:
            _check_zone_index(geometry, cmd.zone)
            zi = cmd.zone
        z = zones[zi]
        addr = z.write_pointer if cmd.addr is None else cmd.addr
        if z.condition in (READ_ONLY, OFFLINE):
            raise ZoneCommandError(ZONE_INACCESSIBLE,
                                   f"write to {z.condition} zone {zi}")
        if cmd.length is None or cmd.length <= 0 or cmd.length % geometry.block_size:
            raise ZoneCommandError(
                UNALIGNED_WRITE,
                f"write length {cmd.length} not a positive block multiple")
        if addr != z.write_pointer:
            raise ZoneCommandError(
                UNALIGNED_WRITE,
                f"write at {addr}, zone {zi} write pointer is {z.write_pointer}")
        if addr + cmd.length > z.start + cap:
            raise ZoneCommandError(
                ZONE_BOUNDARY,
                f"write of {cmd.length} at {addr} exceeds zone {zi} capacity")
        new_wp = addr + cmd.length
        full = new_wp == z.start + cap
        was_open = z.condition in _OPEN_CONDS
        if not was_open and not full:
            _budget(geometry, open_count)
            open_count += 1
        elif was_open and full:
            open_count -= 1
        cond = FULL if full else (z.condition if was_open else IMPLICIT_OPEN)
        zones[zi] = ZoneState(zi, z.start, new_wp, cond, z.reset_count)
        return open_count, addr, zi

    if op == APPEND:
        _check_zone_index(geometry, cmd.zone)
        zi = cmd.zone
        z = zones[zi]
        if z.condition in (READ_ONLY, OFFLINE):
            raise ZoneCommandError(ZONE_INACCESSIBLE,
                                   f"append to {z.condition} zone {zi}")
        if cmd.length is None or cmd.length <= 0 or cmd.length % geometry.block_size:
            raise ZoneCommandError(
                UNALIGNED_WRITE,
                f"append length {cmd.length} not a positive block multiple")
        addr = z.write_pointer
        if addr + cmd.length > z.start + cap:
            raise ZoneCommandError(
                ZONE_BOUNDARY,
                f"append of {cmd.length} exceeds zone {zi} capacity")
        new_wp = addr + cmd.length
        full = new_wp == z.start + cap
        was_open = z.condition in _OPEN_CONDS
        if not was_open and not full:
            _budget(geometry, open_count)
            open_count += 1
        elif was_open and full:
            open_count -= 1
        cond = FULL if full else (z.condition if was_open else IMPLICIT_OPEN)
        zones[zi] = ZoneState(zi, z.start, new_wp, cond, z.reset_count)
        return open_count, addr, zi

    _check_zone_index(geometry, cmd.zone)
    zi = cmd.zone
    z = zones[zi]
    if z.condition in (READ_ONLY, OFFLINE):
        raise ZoneCommandError(ZONE_INACCESSIBLE, f"{op} on {z.condition} zone {zi}")

    if op == RESET:
        if z.condition in _OPEN_CONDS:
            open_count -= 1
        zones[zi] = ZoneState(zi, z.start, z.start, EMPTY, z.reset_count + 1)
        return open_count, None, zi

    if op == FINISH:
        if z.condition in _OPEN_CONDS:
            open_count -= 1
        zones[zi] = ZoneState(zi, z.start, z.start + cap, FULL, z.reset_count)
        return open_count, None, zi

    if op == OPEN:
        if z.condition == FULL:
            raise ZoneCommandError(INVALID_TRANSITION, f"open on FULL zone {zi}")
        if z.condition == EXPLICIT_OPEN:
            return open_count, None, zi
        if z.condition == IMPLICIT_OPEN:
            zones[zi] = ZoneState(zi, z.start, z.write_pointer, EXPLICIT_OPEN,
                                  z.reset_count)
            return open_count, None, zi
        _budget(geometry, open_count)
        zones[zi] = ZoneState(zi, z.start, z.write_pointer, EXPLICIT_OPEN,
                              z.reset_count)
        return open_count + 1, None, zi

    if op == CLOSE:
        if z.condition == CLOSED:
            return open_count, None, zi
        if z.condition not in _OPEN_CONDS:
            raise ZoneCommandError(INVALID_TRANSITION,
                                   f"close on {z.condition} zone {zi}")
        cond = CLOSED if z.write_pointer > z.start else EMPTY
        zones[zi] = ZoneState(zi, z.start, z.write_pointer, cond, z.reset_count)
        return open_count - 1, None, zi

    raise ZoneCommandError(INVALID_TRANSITION, f"unknown command op {op!r}")


def apply(state, cmd):
    """Pure transition: returns (new state, assigned/target address or None).

    write returns its address, append returns the address the device picked.
    """
    zones = list(state.zones)
    open_count, result, _ = _apply_mut(state.geometry, zones, state.open_zones, cmd)
    return DeviceState(state.geometry, tuple(zones), open_count), result


class SimCounters:
    """Per-zone ground-truth counters kept by the simulator; the oracle the
    trace aggregation must reproduce."""

    def __init__(self, nr_zones):
        self.op_counts = [dict() for _ in range(nr_zones)]
        self.bytes_written = [0] * nr_zones
        self.bytes_read = [0] * nr_zones
        self.reset_count = [0] * nr_zones

    def record(self, zone, event_op, length):
        counts = self.op_counts[zone]
        counts[event_op] = counts.get(event_op, 0) + 1
        if event_op in (trace.WRITE, trace.APPEND):
            self.bytes_written[zone] += length
        elif event_op == trace.READ:
            self.bytes_read[zone] += length
        elif event_op == trace.RESET:
            self.reset_count[zone] += 1


def run_script(geometry, script, initial=None):
    """Execute a workload script; returns (final state, events, counters).

    Emits one canonical DEV TraceEvent per command. Any rejected command
    aborts with the failing command index attached.
    """
    state = initial if initial is not None else new_device(geometry)
    zones = list(state.zones)
    open_count = state.open_zones
    counters = SimCounters(geometry.nr_zones)
    events = []
    last_ts = None
    for idx, cmd in enumerate(script):
        if last_ts is not None and cmd.ts_ns <= last_ts:
            raise ZoneCommandError(
                INVALID_TRANSITION,
                f"command {idx}: timestamps must be strictly increasing")
        last_ts = cmd.ts_ns
        try:
            open_count, addr, zi = _apply_mut(geometry, zones, open_count, cmd)
        except ZoneCommandError as exc:
            raise ZoneCommandError(exc.code, f"command {idx}: {exc.message}") from exc
        except RangeError as exc:
            raise RangeError(f"command {idx}: {exc}") from exc
        ev_op = _EVENT_OP[cmd.op]
        if cmd.op in (WRITE, APPEND, READ):
            ev = trace.TraceEvent(cmd.ts_ns, trace.LAYER_DEV, ev_op,
                                  addr=addr, length=cmd.length, zone=zi)
            counters.record(zi, ev_op, cmd.length)
        else:
            ev = trace.TraceEvent(cmd.ts_ns, trace.LAYER_DEV, ev_op, zone=zi)
            counters.record(zi, ev_op, 0)
        events.append(ev)
    final = DeviceState(geometry, tuple(zones), open_count)
    return final, events, counters


def parse_script(lines):
    """Parse a workload script: one `<ts> <op> <zone|addr> [<len>]` per line.

    write/append/reset/open/close/finish address a zone; read takes a byte
    address. '#' comments and blank lines are skipped. Timestamps must be
    strictly increasing.
    """
    if isinstance(lines, str):
        lines = lines.splitlines()
    script = []
    last_ts = None
    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3:
            raise ParseError(f"expected `<ts> <op> <target> [<len>]`, got {raw!r}",
                             line_no=line_no)
        try:
            ts = int(parts[0])
        except ValueError:
            raise ParseError(f"bad timestamp {parts[0]!r}", line_no=line_no) from None
        op = parts[1].lower()
        if op not in COMMAND_OPS:
            raise ParseError(f"unknown op {parts[1]!r}", line_no=line_no)
        if last_ts is not None and ts <= last_ts:
            raise ParseError(f"timestamp {ts} not strictly increasing", line_no=line_no)
        last_ts = ts
        try:
            target = parse_size(parts[2])
        except ParseError:
            raise ParseError(f"bad target {parts[2]!r}", line_no=line_no) from None
        length = None
        if op in (WRITE, APPEND, READ):
            if len(parts) != 4:
                raise ParseError(f"{op} requires a length", line_no=line_no)
            length = parse_size(parts[3])
        elif len(parts) != 3:
            raise ParseError(f"{op} takes no length", line_no=line_no)
        if op == READ:
            script.append(Command(op, addr=target, length=length, ts_ns=ts))
        else:
            script.append(Command(op, zone=target, length=length, ts_ns=ts))
    return script


def load_script(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_script(fh)


def script_to_text(script):
    lines = []
    for cmd in script:
        target = cmd.addr if cmd.op == READ else cmd.zone
        if cmd.length is None:
            lines.append(f"{cmd.ts_ns} {cmd.op} {target}")
        else:
            lines.append(f"{cmd.ts_ns} {cmd.op} {target} {cmd.length}")
    return "\n".join(lines) + ("\n" if lines else "")


def state_summary(state):
    """JSON-friendly snapshot of the device state."""
    return {
        "nr_zones": state.geometry.nr_zones,
        "open_zones": state.open_zones,
        "zones": [
            {
                "index": z.index,
                "start": z.start,
                "write_pointer": z.write_pointer,
                "condition": z.condition,
                "reset_count": z.reset_count,
            }
            for z in state.zones
        ],
    }
