"""Segment hotness records and the file<->segment<->zone join."""

import io
from dataclasses import dataclass, field

from ..errors import IntegrityError, ParseError
from .layout import BLOCKS_PER_SEGMENT, SEGMENT_BYTES

HOT_DATA = "HOT_DATA"
WARM_DATA = "WARM_DATA"
COLD_DATA = "COLD_DATA"
HOT_NODE = "HOT_NODE"
WARM_NODE = "WARM_NODE"
COLD_NODE = "COLD_NODE"
HOTNESS_CLASSES = (HOT_DATA, WARM_DATA, COLD_DATA, HOT_NODE, WARM_NODE, COLD_NODE)

COLD_CLASSES = frozenset({COLD_DATA, COLD_NODE})


@dataclass(frozen=True, slots=True)
class SegmentRecord:
    index: int
    hotness: str
    valid_blocks: int
    zone: int | None = None  # derived from geometry when available

    def __post_init__(self):
        if self.hotness not in HOTNESS_CLASSES:
            raise IntegrityError(f"unknown hotness {self.hotness!r}")
        if not 0 <= self.valid_blocks <= BLOCKS_PER_SEGMENT:
            raise IntegrityError(
                f"segment {self.index}: valid_blocks {self.valid_blocks} "
                f"outside [0, {BLOCKS_PER_SEGMENT}]")


def segment_start_byte(index, main_start=0):
    return main_start + index * SEGMENT_BYTES


def load_segment_info(source, geometry=None, main_start=0):
    """Parse a normalized segment-info dump: `<index> <hotness> <valid_blocks>`
    per line, '#' comments. Returns records sorted by index."""
    if isinstance(source, str) and source and "\n" not in source:
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = list(source)

    records = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(
                f"expected `<index> <hotness> <valid_blocks>`, got {raw!r}",
                line_no=line_no)
        try:
            index = int(parts[0])
            valid = int(parts[2])
        except ValueError:
            raise ParseError(f"bad integer in {raw!r}", line_no=line_no) from None
        hotness = parts[1].upper()
        if hotness not in HOTNESS_CLASSES:
            raise ParseError(f"unknown hotness token {parts[1]!r}", line_no=line_no)
        if index in records:
            raise IntegrityError(f"line {line_no}: duplicate segment {index}")
        zone = None
        if geometry is not None:
            zone = geometry.addr_to_zone(segment_start_byte(index, main_start))
        records[index] = SegmentRecord(index, hotness, valid, zone)
    return [records[i] for i in sorted(records)]


def segment_info_text(records):
    out = io.StringIO()
    for rec in records:
        out.write(f"{rec.index} {rec.hotness} {rec.valid_blocks}\n")
    return out.getvalue()


@dataclass(frozen=True, slots=True)
class FileSlice:
    """One extent piece that lies entirely inside one segment."""
    file_id: str
    logical_offset: int
    physical_start: int
    length: int
    segment: int
    hotness: str


@dataclass
class SegmentJoin:
    record: SegmentRecord
    slice_count: int = 0
    files: set = field(default_factory=set)


@dataclass
class SegmapReport:
    per_segment: dict  # segment index -> SegmentJoin
    per_file: dict     # file_id -> {hotness -> slice count}
    file_slices: dict  # file_id -> [FileSlice]
    exclusions: list   # (file_id, logical_offset, physical_start, length, reason)

    def classes_of(self, file_id):
        return self.per_file.get(file_id, {})

    def mixed_files(self):
        return sorted(f for f, classes in self.per_file.items()
                      if len(classes) >= 2)


def segmap(maps, segments, geometry=None, main_start=0):
    """Join file extents with segment hotness.

    Extents are split at 2MiB segment boundaries; pieces outside the main
    area or in unlisted segments are excluded and counted, not dropped
    silently.
    """
    table = {rec.index: rec for rec in segments}
    per_segment = {idx: SegmentJoin(rec) for idx, rec in table.items()}
    per_file = {}
    file_slices = {}
    exclusions = []

    for fmap in maps:
        per_file.setdefault(fmap.file_id, {})
        file_slices.setdefault(fmap.file_id, [])
        for ext in fmap.extents:
            if ext.unwritten:
                continue
            phys = ext.physical_start
            logical = ext.logical_offset
            remaining = ext.length
            if phys < main_start:
                exclusions.append((fmap.file_id, logical, phys, remaining,
                                   "before main area"))
                continue
            while remaining > 0:
                seg_idx = (phys - main_start) // SEGMENT_BYTES
                room = main_start + (seg_idx + 1) * SEGMENT_BYTES - phys
                take = min(room, remaining)
                rec = table.get(seg_idx)
                if rec is None:
                    exclusions.append((fmap.file_id, logical, phys, take,
                                       f"segment {seg_idx} not in segment info"))
                else:
                    join = per_segment[seg_idx]
                    join.slice_count += 1
                    join.files.add(fmap.file_id)
                    counts = per_file[fmap.file_id]
                    counts[rec.hotness] = counts.get(rec.hotness, 0) + 1
                    file_slices[fmap.file_id].append(FileSlice(
                        fmap.file_id, logical, phys, take, seg_idx, rec.hotness))
                phys += take
                logical += take
                remaining -= take

    return SegmapReport(per_segment, per_file, file_slices, exclusions)


def segmap_segment_csv(report):
    out = io.StringIO()
    out.write("segment,hotness,valid_blocks,zone,extent_slices,files\n")
    for idx in sorted(report.per_segment):
        join = report.per_segment[idx]
        rec = join.record
        zone = "" if rec.zone is None else rec.zone
        files = ";".join(sorted(join.files))
        out.write(f"{idx},{rec.hotness},{rec.valid_blocks},{zone},"
                  f"{join.slice_count},{files}\n")
    return out.getvalue()


def segmap_file_csv(report):
    out = io.StringIO()
    out.write("file_id,classes,extent_slices\n")
    for file_id in sorted(report.per_file):
        classes = report.per_file[file_id]
        desc = ";".join(f"{h}:{classes[h]}" for h in sorted(classes))
        total = sum(classes.values())
        out.write(f"{file_id},{desc},{total}\n")
    return out.getvalue()


def imap_csv(locations):
    out = io.StringIO()
    out.write("nid,block_addr,byte_addr,segment,zone,footer_nid,status\n")
    for loc in locations:
        seg = "" if loc.segment is None else loc.segment
        zone = "" if loc.zone is None else loc.zone
        status = "ok" if loc.verified else "STALE_NAT"
        out.write(f"{loc.nid},{loc.block_addr},{loc.byte_addr},{seg},{zone},"
                  f"{loc.footer_nid},{status}\n")
    return out.getvalue()
