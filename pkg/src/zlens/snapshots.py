"""Point-in-time captures of file placement plus segment classification,
and diffing between them (GC moves files around; repeated captures show it).
"""

from dataclasses import dataclass

from .errors import IntegrityError
from .extent_map import load_extent_dump
from .f2fs.layout import SEGMENT_BYTES
from .f2fs.segments import load_segment_info


@dataclass(frozen=True)
class Snapshot:
    ts: int
    maps: tuple          # FileMap sequence
    segments: tuple      # SegmentRecord sequence
    main_start: int = 0

    def segment_table(self):
        return {rec.index: rec for rec in self.segments}

    def file_ids(self):
        return {m.file_id for m in self.maps}


def load_snapshot(extents_path, segments_path, geometry=None, main_start=0, ts=None):
    maps = load_extent_dump(extents_path)
    segments = load_segment_info(segments_path, geometry, main_start)
    if ts is None:
        ts = maps[0].snapshot_ts if maps else 0
    return Snapshot(ts, tuple(maps), tuple(segments), main_start)


def check_series(snapshots):
    """Validate ordering/geometry invariants of a snapshot series."""
    if len(snapshots) < 2:
        raise IntegrityError("snapshot series needs at least 2 captures")
    for a, b in zip(snapshots, snapshots[1:]):
        if b.ts <= a.ts:
            raise IntegrityError(
                f"snapshot timestamps must be strictly increasing "
                f"({a.ts} then {b.ts})")
        if b.main_start != a.main_start:
            raise IntegrityError("snapshots use different main-area offsets")
    return snapshots


@dataclass(frozen=True)
class FilePlacement:
    """Where one file's bytes sit: per-slice (segment, hotness) plus zones."""
    file_id: str
    slices: tuple  # (logical_offset, physical_start, length, segment, hotness)
    zones: frozenset
    classes: tuple  # sorted multiset of hotness classes, one per slice


def file_placements(snapshot, geometry=None):
    """Project a snapshot's files onto segments/zones (unlisted segments get
    hotness None; callers decide whether that matters)."""
    table = snapshot.segment_table()
    out = {}
    for fmap in snapshot.maps:
        slices = []
        zones = set()
        for ext in fmap.extents:
            if ext.unwritten:
                continue
            phys = ext.physical_start
            logical = ext.logical_offset
            remaining = ext.length
            while remaining > 0:
                seg_idx = (phys - snapshot.main_start) // SEGMENT_BYTES \
                    if phys >= snapshot.main_start else None
                if seg_idx is not None:
                    room = snapshot.main_start + (seg_idx + 1) * SEGMENT_BYTES - phys
                else:
                    room = remaining
                take = min(room, remaining)
                rec = table.get(seg_idx) if seg_idx is not None else None
                hotness = rec.hotness if rec is not None else None
                slices.append((logical, phys, take, seg_idx, hotness))
                if geometry is not None:
                    zones.update(range(phys // geometry.zone_size,
                                       (phys + take - 1) // geometry.zone_size + 1))
                phys += take
                logical += take
                remaining -= take
        classes = tuple(sorted(s[4] for s in slices if s[4] is not None))
        out[fmap.file_id] = FilePlacement(fmap.file_id, tuple(slices),
                                          frozenset(zones), classes)
    return out
