"""Per-zone and per-window aggregation of ingested trace events.

Counters are a pure fold: merging partial aggregates over disjoint event
subsets equals aggregating the union. Open intervals are reconstructed from
the time-ordered stream, so they are derived per aggregation pass and only
concatenated on merge.
"""

import io
from dataclasses import dataclass, field

from . import trace
from .units import KiB, MiB, format_size

_BUCKET_LO = 4 * KiB     # 2**12
_BUCKET_HI = 16 * MiB    # 2**24
BUCKET_UNDER = "<4KiB"
BUCKET_OVER = ">16MiB"
BUCKETS = (
    BUCKET_UNDER,
    *[format_size(1 << k) for k in range(12, 25)],
    BUCKET_OVER,
)


def bucket_for(size):
    """Log2 bucket label; bucket B covers [B, 2B). Under/overflow buckets
    catch sizes outside [4KiB, 32MiB)."""
    if size < _BUCKET_LO:
        return BUCKET_UNDER
    if size >= 2 * _BUCKET_HI:
        return BUCKET_OVER
    return BUCKETS[size.bit_length() - 12]


@dataclass(slots=True)
class HistCell:
    ops: int = 0
    bytes: int = 0
    write_ops: int = 0
    write_bytes: int = 0

    def add(self, other):
        self.ops += other.ops
        self.bytes += other.bytes
        self.write_ops += other.write_ops
        self.write_bytes += other.write_bytes


@dataclass(slots=True)
class OpenInterval:
    zone: int
    start_ts: int
    end_ts: int | None = None
    end_reason: str | None = None  # finish | reset | full | None (still open)
    bytes_written: int = 0


@dataclass(slots=True)
class ZoneActivity:
    zone: int
    op_counts: dict = field(default_factory=dict)
    bytes_written: int = 0
    bytes_read: int = 0
    reset_count: int = 0
    histogram: dict = field(default_factory=dict)  # bucket label -> HistCell
    open_intervals: list = field(default_factory=list)
    first_ts: int | None = None
    last_ts: int | None = None

    def count(self, op):
        return self.op_counts.get(op, 0)

    def merge(self, other):
        for op, n in other.op_counts.items():
            self.op_counts[op] = self.op_counts.get(op, 0) + n
        self.bytes_written += other.bytes_written
        self.bytes_read += other.bytes_read
        self.reset_count += other.reset_count
        for bucket, cell in other.histogram.items():
            self.histogram.setdefault(bucket, HistCell()).add(cell)
        self.open_intervals = sorted(
            self.open_intervals + other.open_intervals,
            key=lambda iv: iv.start_ts)
        if other.first_ts is not None:
            self.first_ts = other.first_ts if self.first_ts is None \
                else min(self.first_ts, other.first_ts)
        if other.last_ts is not None:
            self.last_ts = other.last_ts if self.last_ts is None \
                else max(self.last_ts, other.last_ts)

    def counter_state(self):
        """Canonical counter projection used for merge-equality checks."""
        return (
            tuple(sorted(self.op_counts.items())),
            self.bytes_written,
            self.bytes_read,
            self.reset_count,
            tuple(sorted((b, c.ops, c.bytes, c.write_ops, c.write_bytes)
                         for b, c in self.histogram.items() if c.ops)),
        )


class Aggregate:
    """Per-zone activity for one event stream (or one time window of it)."""

    def __init__(self, geometry):
        self.geometry = geometry
        self.zones = {}
        self.unknown_actions = 0
        self.app_fs_events = 0
        self.windows = None  # [(window_start_ns, Aggregate)] when windowed

    def zone(self, index):
        act = self.zones.get(index)
        if act is None:
            act = self.zones[index] = ZoneActivity(index)
        return act

    def activity(self, index):
        """Read-only accessor: untouched zones report zeroed activity."""
        return self.zones.get(index, ZoneActivity(index))

    def reset_counts(self):
        return {z: act.reset_count for z, act in self.zones.items()
                if act.reset_count}

    def reset_vector(self):
        return [self.activity(z).reset_count for z in range(self.geometry.nr_zones)]

    def totals(self):
        total = ZoneActivity(-1)
        for act in self.zones.values():
            total.merge(act)
        total.open_intervals = []
        return total

    def counter_state(self):
        return {z: act.counter_state() for z, act in sorted(self.zones.items())
                if act.counter_state()[0]}

    def merge(self, other):
        if other.geometry.device_span != self.geometry.device_span:
            raise ValueError("cannot merge aggregates over different geometries")
        for z, act in other.zones.items():
            self.zone(z).merge(act)
        self.unknown_actions += other.unknown_actions
        self.app_fs_events += other.app_fs_events
        self.windows = None
        return self


class _IntervalTracker:
    def __init__(self, capacity):
        self.capacity = capacity
        self.current = {}  # zone -> OpenInterval

    def on_event(self, ev, act):
        zone = ev.zone
        op = ev.op
        if op in (trace.WRITE, trace.APPEND):
            iv = self.current.get(zone)
            if iv is None:
                iv = self.current[zone] = OpenInterval(zone, ev.ts_ns)
                act.open_intervals.append(iv)
            iv.bytes_written += ev.length
            if iv.bytes_written >= self.capacity:
                iv.end_ts, iv.end_reason = ev.ts_ns, "full"
                del self.current[zone]
        elif op == trace.OPEN:
            if zone not in self.current:
                iv = self.current[zone] = OpenInterval(zone, ev.ts_ns)
                act.open_intervals.append(iv)
        elif op in (trace.RESET, trace.FINISH):
            iv = self.current.pop(zone, None)
            if iv is not None:
                iv.end_ts = ev.ts_ns
                iv.end_reason = "reset" if op == trace.RESET else "finish"


def _fold(agg, events, track_intervals):
    tracker = _IntervalTracker(agg.geometry.zone_capacity) if track_intervals else None
    for ev in events:
        if ev.layer != trace.LAYER_DEV:
            agg.app_fs_events += 1
            continue
        if ev.op == trace.UNKNOWN_ZONE_ACTION:
            agg.unknown_actions += 1
            continue
        act = agg.zone(ev.zone)
        act.op_counts[ev.op] = act.op_counts.get(ev.op, 0) + 1
        if act.first_ts is None:
            act.first_ts = ev.ts_ns
        act.last_ts = ev.ts_ns
        if ev.op in trace.DATA_OPS:
            cell = act.histogram.setdefault(bucket_for(ev.length), HistCell())
            cell.ops += 1
            cell.bytes += ev.length
            if ev.op == trace.READ:
                act.bytes_read += ev.length
            else:
                act.bytes_written += ev.length
                cell.write_ops += 1
                cell.write_bytes += ev.length
        elif ev.op == trace.RESET:
            act.reset_count += 1
        if tracker is not None:
            tracker.on_event(ev, act)
    return agg


def aggregate(events, geometry, window_ns=None):
    """Fold events into per-zone counters, histograms, and open intervals.

    With window_ns set, also produces a time series of per-window aggregates
    (window start = ts_ns // window_ns * window_ns; empty windows omitted).
    """
    agg = _fold(Aggregate(geometry), events, track_intervals=True)
    if window_ns is not None:
        if window_ns <= 0:
            raise ValueError("window_ns must be positive")
        buckets = {}
        for ev in events:
            buckets.setdefault(ev.ts_ns // window_ns * window_ns, []).append(ev)
        agg.windows = [
            (start, _fold(Aggregate(geometry), evs, track_intervals=False))
            for start, evs in sorted(buckets.items())
        ]
    return agg


def merge(a, b):
    out = Aggregate(a.geometry)
    out.merge(a)
    out.merge(b)
    return out


def zones_csv(agg):
    """One row per zone: op counts, bytes moved, resets."""
    ops = (trace.READ, trace.WRITE, trace.APPEND, trace.RESET,
           trace.OPEN, trace.CLOSE, trace.FINISH)
    out = io.StringIO()
    out.write("zone,reads,writes,appends,resets,opens,closes,finishes,"
              "bytes_read,bytes_written\n")
    for z in range(agg.geometry.nr_zones):
        act = agg.activity(z)
        row = [str(z)] + [str(act.count(op)) for op in ops]
        row += [str(act.bytes_read), str(act.bytes_written)]
        out.write(",".join(row) + "\n")
    return out.getvalue()


def histogram_csv(agg, per_zone=False):
    """I/O-size histogram rows; device-wide by default."""
    out = io.StringIO()
    if per_zone:
        out.write("zone,bucket,ops,bytes,write_ops,write_bytes\n")
        for z in range(agg.geometry.nr_zones):
            hist = agg.activity(z).histogram
            for bucket in BUCKETS:
                cell = hist.get(bucket)
                if cell and cell.ops:
                    out.write(f"{z},{bucket},{cell.ops},{cell.bytes},"
                              f"{cell.write_ops},{cell.write_bytes}\n")
    else:
        out.write("bucket,ops,bytes,write_ops,write_bytes\n")
        hist = agg.totals().histogram
        for bucket in BUCKETS:
            cell = hist.get(bucket)
            if cell and cell.ops:
                out.write(f"{bucket},{cell.ops},{cell.bytes},"
                          f"{cell.write_ops},{cell.write_bytes}\n")
    return out.getvalue()


def resets_csv(agg):
    out = io.StringIO()
    out.write("zone,resets\n")
    for z in range(agg.geometry.nr_zones):
        out.write(f"{z},{agg.activity(z).reset_count}\n")
    return out.getvalue()


def windows_csv(agg):
    if agg.windows is None:
        raise ValueError("aggregate was not windowed")
    out = io.StringIO()
    out.write("window_start_ns,zone,reads,writes,appends,resets,"
              "bytes_read,bytes_written\n")
    for start, window in agg.windows:
        for z in sorted(window.zones):
            act = window.zones[z]
            out.write(f"{start},{z},{act.count(trace.READ)},{act.count(trace.WRITE)},"
                      f"{act.count(trace.APPEND)},{act.reset_count},"
                      f"{act.bytes_read},{act.bytes_written}\n")
    return out.getvalue()
