"""Read-only parsers for F2FS images: superblock, checkpoint, NAT, inodes."""

import io
import logging
import struct
from dataclasses import dataclass, fields

from ..errors import IntegrityError, NotF2FSError, RangeError, UnsupportedError
from . import layout
from .layout import (
    BLOCK_SIZE,
    BLOCKS_PER_SEGMENT,
    CP_BITMAP_OFFSET,
    CP_LARGE_NAT_BITMAP_FLAG,
    MAGIC,
    NAT_ENTRIES_PER_BLOCK,
    NAT_ENTRY_STRUCT,
    NODE_FOOTER_OFFSET,
    NODE_FOOTER_STRUCT,
    SB_BACKUP_OFFSET,
    SB_OFFSET,
    SB_STRUCT,
    checkpoint_checksum,
    test_bitmap_bit,
)

log = logging.getLogger("zlens.f2fs")


@dataclass(frozen=True)
class Superblock:
    magic: int
    major_ver: int
    minor_ver: int
    log_sectorsize: int
    log_sectors_per_block: int
    log_blocksize: int
    log_blocks_per_seg: int
    segs_per_sec: int
    secs_per_zone: int
    checksum_offset: int
    block_count: int
    section_count: int
    segment_count: int
    segment_count_ckpt: int
    segment_count_sit: int
    segment_count_nat: int
    segment_count_ssa: int
    segment_count_main: int
    segment0_blkaddr: int
    cp_blkaddr: int
    sit_blkaddr: int
    nat_blkaddr: int
    ssa_blkaddr: int
    main_blkaddr: int
    root_ino: int
    node_ino: int
    meta_ino: int
    source_offset: int = SB_OFFSET  # which copy this was read from

    @property
    def blocks_per_segment(self):
        return 1 << self.log_blocks_per_seg

    @property
    def block_size(self):
        return 1 << self.log_blocksize

    @property
    def nat_block_count(self):
        # Half the NAT segments hold live blocks; the other half are the
        # paired shadow copies selected via the checkpoint bitmap.
        return (self.segment_count_nat // 2) * self.blocks_per_segment

    @property
    def nat_capacity(self):
        return self.nat_block_count * NAT_ENTRIES_PER_BLOCK

    def pack(self):
        """Byte-exact re-serialization of the parsed prefix."""
        values = [getattr(self, f.name) for f in fields(self)
                  if f.name != "source_offset"]
        return SB_STRUCT.pack(*values)


@dataclass(frozen=True)
class Checkpoint:
    version: int
    flags: int
    cp_pack_total_block_count: int
    next_free_nid: int
    sit_bitmap_bytes: int
    nat_bitmap_bytes: int
    checksum_offset: int
    nat_bitmap: bytes
    pack_index: int  # 0 or 1
    block_addr: int  # block address of the header block


@dataclass(frozen=True)
class NatEntry:
    nid: int
    version: int
    ino: int
    block_addr: int


@dataclass(frozen=True)
class InodeLocation:
    nid: int
    block_addr: int  # block units
    byte_addr: int
    segment: int | None  # main-area-relative, when inside the main area
    zone: int | None
    footer_nid: int
    footer_ino: int

    @property
    def verified(self):
        return self.footer_nid == self.nid


def _open(image):
    if isinstance(image, (str, bytes)) and not hasattr(image, "read"):
        if isinstance(image, bytes):
            return io.BytesIO(image), True
        return open(image, "rb"), True
    return image, False


def _read_at(fh, offset, size):
    fh.seek(offset)
    data = fh.read(size)
    if len(data) != size:
        raise IntegrityError(
            f"short read: wanted {size} bytes at {offset}, got {len(data)}")
    return data


def _try_superblock(raw, offset):
    sb = Superblock(*SB_STRUCT.unpack(raw), source_offset=offset)
    if sb.magic != MAGIC:
        return None, sb.magic
    if sb.log_blocksize != layout.LOG_BLOCK_SIZE:
        raise UnsupportedError(
            f"only 4KiB blocks supported, image has log_blocksize="
            f"{sb.log_blocksize}")
    if sb.log_blocks_per_seg != layout.LOG_BLOCKS_PER_SEGMENT:
        raise UnsupportedError(
            f"only 2MiB segments supported, image has log_blocks_per_seg="
            f"{sb.log_blocks_per_seg}")
    return sb, sb.magic


def parse_superblock(image):
    """Read the superblock at byte 1024, falling back to the backup copy one
    block later. Both invalid -> NOT_F2FS with the magics found."""
    fh, owned = _open(image)
    try:
        magics = []
        for offset in (SB_OFFSET, SB_BACKUP_OFFSET):
            try:
                raw = _read_at(fh, offset, SB_STRUCT.size)
            except IntegrityError:
                magics.append(None)
                continue
            sb, magic = _try_superblock(raw, offset)
            if sb is not None:
                if offset != SB_OFFSET:
                    log.warning("primary superblock invalid, using backup at "
                                "offset %d", offset)
                return sb
            magics.append(magic)
        raise NotF2FSError(
            "no valid F2FS superblock: magics found "
            + ", ".join("<short>" if m is None else hex(m) for m in magics)
            + f" (expected {hex(MAGIC)})")
    finally:
        if owned:
            fh.close()


def _parse_cp_block(block, pack_index, block_addr):
    values = layout.CP_STRUCT.unpack_from(block)
    version = values[0]
    ckpt_flags = values[38]
    total_blocks = values[39]
    next_free_nid = values[43]
    sit_bm_bytes = values[44]
    nat_bm_bytes = values[45]
    checksum_offset = values[46]

    crc, offset = checkpoint_checksum(block)
    if crc is None:
        raise IntegrityError(f"checkpoint checksum offset {offset} out of range")
    (stored,) = struct.unpack_from("<I", block, offset)
    if stored != crc:
        raise IntegrityError(
            f"checkpoint pack {pack_index}: checksum mismatch "
            f"(stored {stored:#x}, computed {crc:#x})")

    if ckpt_flags & CP_LARGE_NAT_BITMAP_FLAG:
        nat_start = CP_BITMAP_OFFSET + 4  # crc slot precedes the bitmaps
    else:
        nat_start = CP_BITMAP_OFFSET + sit_bm_bytes
    nat_end = nat_start + nat_bm_bytes
    if nat_end > BLOCK_SIZE:
        raise UnsupportedError(
            "checkpoint bitmaps exceed the header block (cp_payload layouts "
            "are not supported)")
    return Checkpoint(
        version=version,
        flags=ckpt_flags,
        cp_pack_total_block_count=total_blocks,
        next_free_nid=next_free_nid,
        sit_bitmap_bytes=sit_bm_bytes,
        nat_bitmap_bytes=nat_bm_bytes,
        checksum_offset=checksum_offset,
        nat_bitmap=bytes(block[nat_start:nat_end]),
        pack_index=pack_index,
        block_addr=block_addr,
    )


def parse_checkpoint(image, sb):
    """Read both checkpoint packs and return the live one: highest version
    among packs whose checksum validates."""
    fh, owned = _open(image)
    try:
        candidates = []
        failures = []
        for pack_index in (0, 1):
            block_addr = sb.cp_blkaddr + pack_index * sb.blocks_per_segment
            try:
                block = _read_at(fh, block_addr * BLOCK_SIZE, BLOCK_SIZE)
                candidates.append(_parse_cp_block(block, pack_index, block_addr))
            except (IntegrityError, UnsupportedError) as exc:
                failures.append(f"pack {pack_index}: {exc}")
        if not candidates:
            raise IntegrityError(
                "no valid checkpoint pack: " + "; ".join(failures))
        return max(candidates, key=lambda cp: cp.version)
    finally:
        if owned:
            fh.close()


def nat_block_addr(sb, cp, block_off):
    """Device block address of the live copy of NAT block block_off."""
    seg = block_off >> layout.LOG_BLOCKS_PER_SEGMENT
    off = block_off & (BLOCKS_PER_SEGMENT - 1)
    addr = sb.nat_blkaddr + seg * 2 * BLOCKS_PER_SEGMENT + off
    if block_off >> 3 < len(cp.nat_bitmap) and test_bitmap_bit(cp.nat_bitmap, block_off):
        addr += BLOCKS_PER_SEGMENT
    return addr


def read_nat_entry(image, sb, cp, nid):
    if not 0 <= nid < sb.nat_capacity:
        raise RangeError(
            f"nid {nid} outside NAT range [0, {sb.nat_capacity})")
    fh, owned = _open(image)
    try:
        block_off = nid // NAT_ENTRIES_PER_BLOCK
        entry_off = nid % NAT_ENTRIES_PER_BLOCK
        addr = nat_block_addr(sb, cp, block_off)
        raw = _read_at(fh, addr * BLOCK_SIZE + entry_off * NAT_ENTRY_STRUCT.size,
                       NAT_ENTRY_STRUCT.size)
        version, ino, block_addr = NAT_ENTRY_STRUCT.unpack(raw)
        return NatEntry(nid, version, ino, block_addr)
    finally:
        if owned:
            fh.close()


class UnallocatedError(RangeError):
    """NAT entry exists but carries no block address."""


def locate_inode(image, sb, cp, nid, geometry=None):
    """NAT walk for one nid plus the verification read of its node page.

    Returns the location; a footer nid mismatch is reported as a STALE_NAT
    warning on the result (and the log), not an error.
    """
    entry = read_nat_entry(image, sb, cp, nid)
    if entry.block_addr == 0:
        raise UnallocatedError(f"nid {nid}: UNALLOCATED (NAT block_addr 0)")
    fh, owned = _open(image)
    try:
        raw = _read_at(fh, entry.block_addr * BLOCK_SIZE + NODE_FOOTER_OFFSET,
                       NODE_FOOTER_STRUCT.size)
    finally:
        if owned:
            fh.close()
    footer_nid, footer_ino, _flag, _cp_ver, _next = NODE_FOOTER_STRUCT.unpack(raw)
    byte_addr = entry.block_addr * BLOCK_SIZE
    segment = None
    if entry.block_addr >= sb.main_blkaddr:
        segment = (entry.block_addr - sb.main_blkaddr) // BLOCKS_PER_SEGMENT
    zone = geometry.addr_to_zone(byte_addr) if geometry is not None else None
    if footer_nid != nid:
        log.warning("STALE_NAT: nid %d resolves to a node page whose footer "
                    "says nid %d", nid, footer_nid)
    return InodeLocation(nid, entry.block_addr, byte_addr, segment, zone,
                         footer_nid, footer_ino)
