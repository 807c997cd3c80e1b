"""Executable checkers for the zone-interface contracts.

Rules:
  R1_REQUEST_SCALE          small-write-dominated traffic
  R2_GROUPING_HOTNESS_MIX   one file spread across hotness classes
  R3_GROUPING_GC_RECLASS    GC moved data and reclassified it cold
  R4_LIFETIME_SKEW          reset counts concentrated on few zones
  R5_LOCALITY_FRAGMENTATION fragmented / holey files

Thresholds are configuration: they assign severity, never change which
metrics get computed. Checkers are pure; identical inputs and thresholds
produce identical report sets.
"""

import io
import json
from dataclasses import dataclass, fields

from . import trace
from .aggregate import BUCKETS, BUCKET_OVER, BUCKET_UNDER
from .errors import ParseError
from .f2fs.segments import COLD_CLASSES
from .snapshots import file_placements
from .units import KiB, MiB, parse_size, read_kv_file

R1 = "R1_REQUEST_SCALE"
R2 = "R2_GROUPING_HOTNESS_MIX"
R3 = "R3_GROUPING_GC_RECLASS"
R4 = "R4_LIFETIME_SKEW"
R5 = "R5_LOCALITY_FRAGMENTATION"
RULES = (R1, R2, R3, R4, R5)

INFO = "INFO"
WARN = "WARN"
VIOLATION = "VIOLATION"

PATTERN_FOOTER = "FOOTER"


@dataclass(frozen=True)
class Thresholds:
    large_io_threshold: int = 128 * KiB
    min_large_fraction: float = 0.5
    small_tail_blocks: int = 16
    skew_factor: float = 5.0
    frag_threshold: int = 8
    hole_fraction: float = 0.1
    warn_ratio: float = 0.8


def load_thresholds(path):
    kv = read_kv_file(path)
    known = {f.name: f.type for f in fields(Thresholds)}
    values = {}
    for key, raw in kv.items():
        if key not in known:
            raise ParseError(f"unknown threshold {key!r}")
        if key in ("large_io_threshold",):
            values[key] = parse_size(raw)
        elif key in ("small_tail_blocks", "frag_threshold"):
            values[key] = int(raw)
        else:
            values[key] = float(raw)
    return Thresholds(**values)


def thresholds_text(th):
    return "".join(f"{f.name} = {getattr(th, f.name)}\n" for f in fields(Thresholds))


@dataclass(frozen=True)
class ViolationReport:
    rule_id: str
    severity: str
    subject: dict
    evidence: dict
    ts_range: tuple | None = None

    def to_record(self):
        return {
            "rule_id": self.rule_id,
            "severity": self.severity,
            "subject": self.subject,
            "evidence": self.evidence,
            "ts_range": list(self.ts_range) if self.ts_range else None,
        }

    def to_line(self):
        return json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"))


def _sort_reports(reports):
    return sorted(reports, key=lambda r: (r.rule_id, r.to_line()))


def _severity_low(value, threshold, warn_ratio):
    """Severity for a below-is-bad metric (value should stay >= threshold)."""
    if value < threshold * warn_ratio:
        return VIOLATION
    if value < threshold:
        return WARN
    return None


def _severity_high(value, threshold, warn_ratio):
    """Severity for an above-is-bad metric (value should stay <= threshold)."""
    if value > threshold:
        return VIOLATION
    if value > threshold * warn_ratio:
        return WARN
    return None


def _bucket_floor(label):
    if label == BUCKET_UNDER:
        return 0
    if label == BUCKET_OVER:
        return 32 * MiB
    return parse_size(label)


def check_request_scale(activity, thresholds=Thresholds()):
    """R1: fraction of written bytes carried by large requests.

    Computed from the size histogram, so the threshold snaps up to the next
    bucket floor (the default 128KiB is exactly a bucket edge).
    """
    totals = activity.totals()
    write_bytes = totals.bytes_written
    if write_bytes == 0:
        return []
    effective = min((f for f in map(_bucket_floor, BUCKETS)
                     if f >= thresholds.large_io_threshold),
                    default=32 * MiB)
    large_bytes = sum(cell.write_bytes for label, cell in totals.histogram.items()
                      if _bucket_floor(label) >= effective)
    fraction = large_bytes / write_bytes
    severity = _severity_low(fraction, thresholds.min_large_fraction,
                             thresholds.warn_ratio)
    if severity is None:
        return []
    hist_rows = {label: [cell.write_ops, cell.write_bytes]
                 for label, cell in sorted(totals.histogram.items())
                 if cell.write_ops}
    ts_range = (totals.first_ts, totals.last_ts) \
        if totals.first_ts is not None else None
    return [ViolationReport(
        rule_id=R1,
        severity=severity,
        subject={"scope": "device"},
        evidence={
            "large_fraction": round(fraction, 6),
            "min_large_fraction": thresholds.min_large_fraction,
            "large_io_threshold": effective,
            "write_bytes": write_bytes,
            "large_write_bytes": large_bytes,
            "histogram": hist_rows,
        },
        ts_range=ts_range,
    )]


def _fsync_epochs(events, file_id):
    """Split one file's APP/FS events into FSYNC-delimited windows."""
    epochs = [[]]
    for ev in events:
        if ev.layer == trace.LAYER_DEV:
            continue
        attr_file = ev.attrs.get("file")
        files = ev.attrs.get("files", "")
        if attr_file != file_id and file_id not in files.split(","):
            continue
        if ev.op == trace.FSYNC:
            epochs.append([])
        else:
            epochs[-1].append(ev)
    return epochs


def _tail_in_own_small_epoch(events, file_id, block_size, small_tail_blocks):
    """True when the file's last sync epoch containing writes dirties fewer
    than small_tail_blocks pages."""
    epochs = _fsync_epochs(events, file_id)
    for epoch in reversed(epochs):
        writes = [ev for ev in epoch if ev.op == trace.WRITE and ev.length]
        if not writes:
            continue
        dirty_bytes = sum(ev.length for ev in writes)
        dirty_pages = -(-dirty_bytes // block_size)
        return dirty_pages < small_tail_blocks
    return False


def check_grouping(segmap_report, events=None, thresholds=Thresholds(),
                   block_size=4096):
    """R2: files whose extents span >=2 hotness classes.

    A single small trailing extent written in its own near-empty sync epoch
    is annotated pattern=FOOTER (the SSTable-footer shape). The epoch test
    needs trace data; without it R2 still fires, unannotated.
    """
    if segmap_report is None:
        return [ViolationReport(R2, INFO, {"scope": "segmap"},
                                {"notice": "insufficient input: segment data missing"})]
    reports = []
    for file_id in segmap_report.mixed_files():
        classes = segmap_report.per_file[file_id]
        slices = sorted(segmap_report.file_slices[file_id],
                        key=lambda s: s.logical_offset)
        majority = max(sorted(classes), key=lambda h: classes[h])
        minority_slices = [s for s in slices if s.hotness != majority]
        evidence = {
            "classes": dict(sorted(classes.items())),
            "slices": [
                {"logical_offset": s.logical_offset, "length": s.length,
                 "segment": s.segment, "hotness": s.hotness}
                for s in slices
            ],
        }
        pattern = None
        if (len(minority_slices) == 1
                and minority_slices[0] is slices[-1]
                and minority_slices[0].length <= thresholds.small_tail_blocks * block_size
                and events is not None
                and _tail_in_own_small_epoch(events, file_id, block_size,
                                             thresholds.small_tail_blocks)):
            pattern = PATTERN_FOOTER
        if pattern:
            evidence["pattern"] = pattern
        reports.append(ViolationReport(R2, VIOLATION, {"file": file_id}, evidence))
    return _sort_reports(reports)


def check_gc_reclassification(series, geometry=None):
    """R3: file data that moved between snapshots and got reclassified cold,
    plus co-location of previously segregated files in one new segment."""
    reports = []
    for before, after in zip(series, series[1:]):
        p_before = file_placements(before, geometry)
        p_after = file_placements(after, geometry)
        common = sorted(set(p_before) & set(p_after))
        only_before = sorted(set(p_before) - set(p_after))
        only_after = sorted(set(p_after) - set(p_before))
        if only_before or only_after:
            reports.append(ViolationReport(
                R3, INFO, {"snapshots": [before.ts, after.ts]},
                {"notice": "file sets differ; compared on the intersection",
                 "only_before": only_before, "only_after": only_after},
                ts_range=(before.ts, after.ts)))

        moved_to_cold = {}
        for file_id in common:
            a, b = p_before[file_id], p_after[file_id]
            phys_a = sorted((s[0], s[1], s[2]) for s in a.slices)
            phys_b = sorted((s[0], s[1], s[2]) for s in b.slices)
            if phys_a == phys_b:
                continue
            new_cold = sorted(set(b.classes) & COLD_CLASSES)
            had_non_cold = any(c not in COLD_CLASSES for c in a.classes)
            if new_cold and had_non_cold:
                moved_to_cold[file_id] = (a, b)

        # previously differently-classified files now sharing a segment
        colocated = {}
        for file_id, (a, b) in moved_to_cold.items():
            for s in b.slices:
                if s[3] is not None:
                    colocated.setdefault(s[3], []).append(file_id)
        colocation_by_file = {}
        for seg, file_ids in sorted(colocated.items()):
            file_ids = sorted(set(file_ids))
            if len(file_ids) < 2:
                continue
            before_classes = {f: sorted(set(p_before[f].classes)) for f in file_ids}
            if len({tuple(v) for v in before_classes.values()}) > 1:
                for f in file_ids:
                    colocation_by_file.setdefault(f, []).append(
                        {"segment": seg, "files": file_ids,
                         "before_classes": before_classes})

        for file_id, (a, b) in sorted(moved_to_cold.items()):
            evidence = {
                "before": [{"zone": _zone_of(s, geometry), "segment": s[3],
                            "hotness": s[4]} for s in a.slices],
                "after": [{"zone": _zone_of(s, geometry), "segment": s[3],
                           "hotness": s[4]} for s in b.slices],
            }
            if file_id in colocation_by_file:
                evidence["colocation"] = colocation_by_file[file_id]
            reports.append(ViolationReport(
                R3, VIOLATION, {"file": file_id}, evidence,
                ts_range=(before.ts, after.ts)))
    return _sort_reports(reports)


def _zone_of(slice_tuple, geometry):
    if geometry is None:
        return None
    return slice_tuple[1] // geometry.zone_size


def _median(values):
    vals = sorted(values)
    n = len(vals)
    if n == 0:
        return 0.0
    mid = n // 2
    return float(vals[mid]) if n % 2 else (vals[mid - 1] + vals[mid]) / 2.0


def check_lifetime(activity, thresholds=Thresholds()):
    """R4: zones whose reset counts tower over the median reset count."""
    nr_zones = activity.geometry.nr_zones
    counts = activity.reset_vector()
    total_dev_events = sum(
        sum(act.op_counts.values()) for act in activity.zones.values())
    if total_dev_events == 0:
        return []  # no device activity at all: nothing to analyze
    nonzero = [c for c in counts if c > 0]
    ts_range = None
    ts_candidates = [(act.first_ts, act.last_ts) for act in activity.zones.values()
                     if act.first_ts is not None]
    if ts_candidates:
        ts_range = (min(t[0] for t in ts_candidates),
                    max(t[1] for t in ts_candidates))
    if not nonzero:
        return [ViolationReport(R4, INFO, {"scope": "device"},
                                {"notice": "no reset activity"},
                                ts_range=ts_range)]
    med = _median(nonzero)
    mean = sum(counts) / nr_zones
    variance = sum((c - mean) ** 2 for c in counts) / nr_zones
    cv = (variance ** 0.5) / mean if mean else 0.0
    distribution = {
        "min": min(counts),
        "max": max(counts),
        "median_nonzero": med,
        "cv": round(cv, 6),
        "zones_with_resets": len(nonzero),
    }
    reports = []
    for zone, count in enumerate(counts):
        if count == 0:
            continue
        severity = _severity_high(count, thresholds.skew_factor * med,
                                  thresholds.warn_ratio)
        if severity is None:
            continue
        act = activity.activity(zone)
        reports.append(ViolationReport(
            R4, severity, {"zone": zone},
            {"reset_count": count, "median_nonzero": med,
             "skew_factor": thresholds.skew_factor,
             "first_ts": act.first_ts, "last_ts": act.last_ts,
             "distribution": distribution},
            ts_range=ts_range))
    never = [z for z, c in enumerate(counts) if c == 0]
    if never:
        reports.append(ViolationReport(
            R4, INFO, {"scope": "device"},
            {"never_reset_zones": never, "distribution": distribution},
            ts_range=ts_range))
    return _sort_reports(reports)


def check_locality(stats_list, thresholds=Thresholds()):
    """R5: heavily fragmented files, or files with large logical holes."""
    reports = []
    for st in stats_list:
        frag_sev = _severity_high(st.discontinuities, thresholds.frag_threshold,
                                  thresholds.warn_ratio)
        hole_frac = st.hole_bytes / st.file_size if st.file_size else 0.0
        hole_sev = _severity_high(hole_frac, thresholds.hole_fraction,
                                  thresholds.warn_ratio)
        if frag_sev is None and hole_sev is None:
            continue
        severity = VIOLATION if VIOLATION in (frag_sev, hole_sev) else WARN
        evidence = {
            "discontinuities": st.discontinuities,
            "frag_threshold": thresholds.frag_threshold,
            "hole_bytes": st.hole_bytes,
            "hole_fraction": round(hole_frac, 6),
            "hole_fraction_threshold": thresholds.hole_fraction,
            "extent_count": st.extent_count,
            "file_size": st.file_size,
            "triggered": sorted(
                name for name, sev in
                (("fragmentation", frag_sev), ("holes", hole_sev)) if sev),
        }
        reports.append(ViolationReport(R5, severity, {"file": st.file_id}, evidence))
    return _sort_reports(reports)


def reports_to_lines(reports):
    return "".join(r.to_line() + "\n" for r in reports)


def summary_text(reports):
    out = io.StringIO()
    if not reports:
        out.write("no findings\n")
        return out.getvalue()
    by_sev = {}
    for r in reports:
        by_sev[r.severity] = by_sev.get(r.severity, 0) + 1
    out.write("findings: " + ", ".join(
        f"{by_sev[s]} {s}" for s in (VIOLATION, WARN, INFO) if s in by_sev) + "\n")
    for r in reports:
        subject = ", ".join(f"{k}={v}" for k, v in sorted(r.subject.items()))
        extra = ""
        if r.evidence.get("pattern"):
            extra = f" pattern={r.evidence['pattern']}"
        if "notice" in r.evidence:
            extra = f" ({r.evidence['notice']})"
        out.write(f"  {r.severity:9s} {r.rule_id:26s} {subject}{extra}\n")
    return out.getvalue()


def has_violation(reports):
    return any(r.severity == VIOLATION for r in reports)
