"""File extents, their zone projection, and fragmentation statistics.

Extent-dump text format, one extent per line:

    <file_id> <logical_offset> <physical_start> <length> <flags>

flags is `-` or a comma list of LAST,UNWRITTEN,MERGED. Two optional
directives: `= <file_id> <file_size>` pins a file size (needed to see
trailing holes) and `@ <ts_ns>` sets the snapshot timestamp for the dump.
'#' starts a comment. Sizes accept IEC suffixes.
"""

import io
from dataclasses import dataclass

from .errors import IntegrityError, ParseError, RangeError
from .units import parse_size

EXTENT_FLAGS = frozenset({"LAST", "UNWRITTEN", "MERGED"})


@dataclass(frozen=True, slots=True)
class Extent:
    file_id: str
    logical_offset: int
    physical_start: int
    length: int
    flags: frozenset = frozenset()

    def __post_init__(self):
        if self.length <= 0:
            raise IntegrityError(
                f"extent of {self.file_id} at {self.logical_offset}: "
                f"length must be positive, got {self.length}")
        bad = self.flags - EXTENT_FLAGS
        if bad:
            raise IntegrityError(f"unknown extent flags: {sorted(bad)}")

    @property
    def logical_end(self):
        return self.logical_offset + self.length

    @property
    def physical_end(self):
        return self.physical_start + self.length

    @property
    def unwritten(self):
        return "UNWRITTEN" in self.flags


@dataclass(frozen=True, slots=True)
class FileMap:
    file_id: str
    file_size: int
    extents: tuple
    snapshot_ts: int = 0

    def __post_init__(self):
        prev = None
        for ext in self.extents:
            if prev is not None:
                if ext.logical_offset < prev.logical_end:
                    raise IntegrityError(
                        f"{self.file_id}: extents overlap at logical "
                        f"{ext.logical_offset}")
            prev = ext
        if self.extents and self.extents[-1].logical_end > self.file_size:
            raise IntegrityError(
                f"{self.file_id}: extents extend past file size {self.file_size}")

    @property
    def mapped_bytes(self):
        return sum(e.length for e in self.extents if not e.unwritten)


@dataclass(frozen=True, slots=True)
class ZoneSlice:
    file_id: str
    logical_offset: int
    physical_start: int
    length: int


@dataclass(frozen=True)
class ZonePlacement:
    """zone index -> slices of file data resident in that zone, each slice
    fully inside its zone, ordered by physical address."""
    zones: dict

    def slices(self, zone):
        return self.zones.get(zone, ())

    def total_bytes(self):
        return sum(s.length for slices in self.zones.values() for s in slices)

    def zones_of(self, file_id):
        return sorted(z for z, slices in self.zones.items()
                      if any(s.file_id == file_id for s in slices))


def _parse_flags(token):
    if token == "-":
        return frozenset()
    return frozenset(part.strip().upper() for part in token.split(",") if part.strip())


def load_extent_dump(source):
    """Parse an extent dump into FileMaps sorted by file_id.

    Rejects duplicate (file, logical_offset) records and overlapping logical
    ranges. When no `=` size directive is present, file size is the logical
    end of the last extent.
    """
    if isinstance(source, str) and source and "\n" not in source:
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = list(source)

    snapshot_ts = 0
    sizes = {}
    extents = {}  # file_id -> list[Extent]
    seen_offsets = set()
    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "@":
            if len(parts) != 2:
                raise ParseError("expected `@ <ts_ns>`", line_no=line_no)
            snapshot_ts = int(parts[1])
            continue
        if parts[0] == "=":
            if len(parts) != 3:
                raise ParseError("expected `= <file_id> <file_size>`", line_no=line_no)
            sizes[parts[1]] = parse_size(parts[2])
            extents.setdefault(parts[1], [])
            continue
        if len(parts) != 5:
            raise ParseError(
                f"expected `<file_id> <logical_offset> <physical_start> "
                f"<length> <flags>`, got {raw!r}", line_no=line_no)
        file_id = parts[0]
        try:
            logical = parse_size(parts[1])
            physical = parse_size(parts[2])
            length = parse_size(parts[3])
        except ParseError as exc:
            raise ParseError(str(exc), line_no=line_no) from None
        if (file_id, logical) in seen_offsets:
            raise IntegrityError(
                f"line {line_no}: duplicate extent for {file_id} at "
                f"logical {logical}")
        seen_offsets.add((file_id, logical))
        try:
            ext = Extent(file_id, logical, physical, length, _parse_flags(parts[4]))
        except IntegrityError as exc:
            raise IntegrityError(f"line {line_no}: {exc}") from None
        extents.setdefault(file_id, []).append(ext)

    maps = []
    for file_id in sorted(extents):
        exts = tuple(sorted(extents[file_id], key=lambda e: e.logical_offset))
        size = sizes.get(file_id, exts[-1].logical_end if exts else 0)
        maps.append(FileMap(file_id, size, exts, snapshot_ts))
    return maps


def dump_to_text(maps):
    out = io.StringIO()
    ts = maps[0].snapshot_ts if maps else 0
    if ts:
        out.write(f"@ {ts}\n")
    for fmap in maps:
        out.write(f"= {fmap.file_id} {fmap.file_size}\n")
        for ext in fmap.extents:
            flags = ",".join(sorted(ext.flags)) if ext.flags else "-"
            out.write(f"{fmap.file_id} {ext.logical_offset} "
                      f"{ext.physical_start} {ext.length} {flags}\n")
    return out.getvalue()


def map_to_zones(geometry, maps):
    """Project extents onto zones, splitting at zone boundaries.

    UNWRITTEN extents occupy no device bytes and are excluded. The union of
    emitted slices equals the written extents byte-for-byte.
    """
    zones = {}
    for fmap in maps:
        for ext in fmap.extents:
            if ext.unwritten:
                continue
            try:
                geometry.check_addr(ext.physical_start)
                geometry.check_addr(ext.physical_end - 1, what="extent end")
            except RangeError as exc:
                raise RangeError(
                    f"{fmap.file_id} extent at logical {ext.logical_offset}: {exc}"
                ) from None
            phys = ext.physical_start
            logical = ext.logical_offset
            remaining = ext.length
            while remaining > 0:
                zone = phys // geometry.zone_size
                room = (zone + 1) * geometry.zone_size - phys
                take = min(room, remaining)
                zones.setdefault(zone, []).append(
                    ZoneSlice(fmap.file_id, logical, phys, take))
                phys += take
                logical += take
                remaining -= take
    return ZonePlacement({
        z: tuple(sorted(slices, key=lambda s: s.physical_start))
        for z, slices in zones.items()
    })


def placement_csv(placement):
    out = io.StringIO()
    out.write("zone,file_id,logical_offset,length\n")
    for zone in sorted(placement.zones):
        for s in placement.zones[zone]:
            out.write(f"{zone},{s.file_id},{s.logical_offset},{s.length}\n")
    return out.getvalue()


def nearest_rank(sorted_values, pct):
    """Nearest-rank percentile over an already-sorted multiset."""
    if not sorted_values:
        return 0
    rank = max(1, -(-pct * len(sorted_values) // 100))  # ceil
    return sorted_values[rank - 1]


@dataclass(frozen=True, slots=True)
class FileStats:
    file_id: str
    file_size: int
    extent_count: int
    len_min: int
    len_max: int
    len_mean: float
    len_p50: int
    len_p90: int
    len_p99: int
    hole_count: int
    hole_bytes: int
    discontinuities: int
    zones_spanned: int | None = None


def file_stats(fmap, geometry=None):
    """Extent-length profile, logical holes, physical discontinuities, and
    (when geometry is given) the number of zones the file touches."""
    lengths = sorted(e.length for e in fmap.extents)
    n = len(lengths)
    hole_count = 0
    hole_bytes = 0
    cursor = 0
    for ext in fmap.extents:
        if ext.logical_offset > cursor:
            hole_count += 1
            hole_bytes += ext.logical_offset - cursor
        cursor = ext.logical_end
    if fmap.file_size > cursor and n:
        hole_count += 1
        hole_bytes += fmap.file_size - cursor
    if not n and fmap.file_size > 0:
        hole_count = 1
        hole_bytes = fmap.file_size

    discontinuities = 0
    for prev, cur in zip(fmap.extents, fmap.extents[1:]):
        if prev.physical_end != cur.physical_start:
            discontinuities += 1

    zones_spanned = None
    if geometry is not None:
        touched = set()
        for ext in fmap.extents:
            if ext.unwritten:
                continue
            touched.update(range(ext.physical_start // geometry.zone_size,
                                 (ext.physical_end - 1) // geometry.zone_size + 1))
        zones_spanned = len(touched)

    return FileStats(
        file_id=fmap.file_id,
        file_size=fmap.file_size,
        extent_count=n,
        len_min=lengths[0] if n else 0,
        len_max=lengths[-1] if n else 0,
        len_mean=sum(lengths) / n if n else 0.0,
        len_p50=nearest_rank(lengths, 50),
        len_p90=nearest_rank(lengths, 90),
        len_p99=nearest_rank(lengths, 99),
        hole_count=hole_count,
        hole_bytes=hole_bytes,
        discontinuities=discontinuities,
        zones_spanned=zones_spanned,
    )


def stats_csv(stats_list):
    out = io.StringIO()
    out.write("file_id,file_size,extent_count,len_min,len_max,len_mean,"
              "len_p50,len_p90,len_p99,hole_count,hole_bytes,"
              "discontinuities,zones_spanned\n")
    for s in stats_list:
        zs = "" if s.zones_spanned is None else str(s.zones_spanned)
        out.write(f"{s.file_id},{s.file_size},{s.extent_count},{s.len_min},"
                  f"{s.len_max},{s.len_mean:.1f},{s.len_p50},{s.len_p90},"
                  f"{s.len_p99},{s.hole_count},{s.hole_bytes},"
                  f"{s.discontinuities},{zs}\n")
    return out.getvalue()


def stats_report(stats_list):
    """Human-readable per-file fragmentation report."""
    out = io.StringIO()
    for s in stats_list:
        out.write(f"file {s.file_id}: size {s.file_size}, "
                  f"{s.extent_count} extent(s)\n")
        if s.extent_count:
            out.write(f"  extent length min/mean/max: {s.len_min}/"
                      f"{s.len_mean:.1f}/{s.len_max}  "
                      f"p50/p90/p99: {s.len_p50}/{s.len_p90}/{s.len_p99}\n")
        out.write(f"  holes: {s.hole_count} ({s.hole_bytes} bytes)  "
                  f"physical discontinuities: {s.discontinuities}")
        if s.zones_spanned is not None:
            out.write(f"  zones spanned: {s.zones_spanned}")
        out.write("\n")
    return out.getvalue()
