"""ZNS device geometry and address-to-zone arithmetic.

All addresses are bytes internally; sector/LBA inputs are converted at the
boundary using block_size.
"""

from dataclasses import dataclass

from .errors import IntegrityError, RangeError
from .units import format_size, parse_size, read_kv, read_kv_file


@dataclass(frozen=True)
class ZoneGeometry:
    block_size: int
    zone_size: int
    nr_zones: int
    zone_capacity: int = 0  # 0 -> defaults to zone_size
    max_open_zones: int | None = None  # None -> unlimited

    def __post_init__(self):
        if self.zone_capacity == 0:
            object.__setattr__(self, "zone_capacity", self.zone_size)
        if self.block_size <= 0 or self.zone_size <= 0 or self.nr_zones <= 0:
            raise IntegrityError("geometry fields must be positive")
        if self.zone_size % self.block_size:
            raise IntegrityError(
                f"zone_size {self.zone_size} not a multiple of block_size {self.block_size}")
        if self.zone_capacity % self.block_size:
            raise IntegrityError(
                f"zone_capacity {self.zone_capacity} not a multiple of block_size {self.block_size}")
        if not 0 < self.zone_capacity <= self.zone_size:
            raise IntegrityError(
                f"zone_capacity {self.zone_capacity} outside (0, zone_size={self.zone_size}]")
        if self.max_open_zones is not None and self.max_open_zones <= 0:
            raise IntegrityError("max_open_zones must be positive or unlimited")

    @property
    def device_span(self):
        return self.nr_zones * self.zone_size

    def zone_start(self, zone):
        return zone * self.zone_size

    def check_addr(self, addr, what="address"):
        if not 0 <= addr < self.device_span:
            raise RangeError(
                f"{what} {addr} outside device span [0, {self.device_span}) "
                f"({self.nr_zones} zones x {format_size(self.zone_size)})")
        return addr

    def addr_to_zone(self, addr):
        self.check_addr(addr)
        return addr // self.zone_size

    def block_to_addr(self, block):
        return block * self.block_size


def addr_to_zone(geometry, addr):
    return geometry.addr_to_zone(addr)


def load_geometry(path):
    """Load a geometry file: key=value with block_size, zone_size, nr_zones,
    optional zone_capacity and max_open_zones. Sizes accept IEC suffixes."""
    return geometry_from_kv(read_kv_file(path))


def parse_geometry(lines):
    return geometry_from_kv(read_kv(lines))


def geometry_from_kv(kv):
    required = ("block_size", "zone_size", "nr_zones")
    missing = [k for k in required if k not in kv]
    if missing:
        raise IntegrityError(f"geometry missing keys: {', '.join(missing)}")
    known = {"block_size", "zone_size", "zone_capacity", "nr_zones", "max_open_zones"}
    unknown = sorted(set(kv) - known)
    if unknown:
        raise IntegrityError(f"geometry has unknown keys: {', '.join(unknown)}")
    max_open = kv.get("max_open_zones", "unlimited")
    return ZoneGeometry(
        block_size=parse_size(kv["block_size"]),
        zone_size=parse_size(kv["zone_size"]),
        zone_capacity=parse_size(kv.get("zone_capacity", "0")),
        nr_zones=int(kv["nr_zones"]),
        max_open_zones=None if str(max_open).lower() in ("unlimited", "none", "0")
        else int(max_open),
    )


def geometry_to_text(geom):
    lines = [
        f"block_size = {geom.block_size}",
        f"zone_size = {geom.zone_size}",
        f"zone_capacity = {geom.zone_capacity}",
        f"nr_zones = {geom.nr_zones}",
        f"max_open_zones = {'unlimited' if geom.max_open_zones is None else geom.max_open_zones}",
    ]
    return "\n".join(lines) + "\n"
