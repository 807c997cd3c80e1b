"""On-disk structure layouts (little-endian, packed) and the F2FS CRC."""

import struct
import zlib

MAGIC = 0xF2F52010
BLOCK_SIZE = 4096
LOG_BLOCK_SIZE = 12
BLOCKS_PER_SEGMENT = 512
LOG_BLOCKS_PER_SEGMENT = 9
SEGMENT_BYTES = BLOCK_SIZE * BLOCKS_PER_SEGMENT  # 2 MiB

SB_OFFSET = 1024
SB_BACKUP_OFFSET = 1024 + BLOCK_SIZE

# Leading fields of the superblock, byte-exact. uuid and friends follow at
# offset 108 and are not interpreted here.
SB_FIELDS = (
    "magic", "major_ver", "minor_ver",
    "log_sectorsize", "log_sectors_per_block", "log_blocksize",
    "log_blocks_per_seg", "segs_per_sec", "secs_per_zone",
    "checksum_offset", "block_count",
    "section_count", "segment_count", "segment_count_ckpt",
    "segment_count_sit", "segment_count_nat", "segment_count_ssa",
    "segment_count_main", "segment0_blkaddr", "cp_blkaddr",
    "sit_blkaddr", "nat_blkaddr", "ssa_blkaddr", "main_blkaddr",
    "root_ino", "node_ino", "meta_ino",
)
SB_STRUCT = struct.Struct("<IHH7IQ16I")
assert SB_STRUCT.size == 108

# Checkpoint header block, fields through alloc_type; the SIT/NAT version
# bitmaps start at CP_BITMAP_OFFSET.
CP_FIELDS = (
    "checkpoint_ver", "user_block_count", "valid_block_count",
    "rsvd_segment_count", "overprov_segment_count", "free_segment_count",
    "cur_node_segno", "cur_node_blkoff", "cur_data_segno", "cur_data_blkoff",
    "ckpt_flags", "cp_pack_total_block_count", "cp_pack_start_sum",
    "valid_node_count", "valid_inode_count", "next_free_nid",
    "sit_ver_bitmap_bytesize", "nat_ver_bitmap_bytesize",
    "checksum_offset", "elapsed_time", "alloc_type",
)
CP_STRUCT = struct.Struct("<QQQ3I8I8H8I8H9IQ16s")
CP_BITMAP_OFFSET = CP_STRUCT.size
assert CP_BITMAP_OFFSET == 192

CP_CHKSUM_OFFSET = BLOCK_SIZE - 4
CP_LARGE_NAT_BITMAP_FLAG = 0x00000400

NAT_ENTRY_STRUCT = struct.Struct("<BII")  # version, ino, block_addr
NAT_ENTRIES_PER_BLOCK = BLOCK_SIZE // NAT_ENTRY_STRUCT.size  # 455

NODE_FOOTER_STRUCT = struct.Struct("<IIIQI")  # nid, ino, flag, cp_ver, next_blkaddr
NODE_FOOTER_OFFSET = BLOCK_SIZE - NODE_FOOTER_STRUCT.size


def f2fs_crc32(data, seed=MAGIC):
    """CRC32 as F2FS computes it: poly 0xEDB88320, init = seed, no final xor."""
    return zlib.crc32(data, seed ^ 0xFFFFFFFF) ^ 0xFFFFFFFF


def checkpoint_checksum(block):
    """Checksum of a checkpoint block per its embedded checksum_offset.

    The CRC covers [0, offset); when the offset is inside the block (large
    bitmap layouts) coverage continues after the 4-byte slot.
    """
    (offset,) = struct.unpack_from("<I", block, 164)
    if not CP_BITMAP_OFFSET <= offset <= CP_CHKSUM_OFFSET:
        return None, offset
    crc = f2fs_crc32(block[:offset])
    if offset < CP_CHKSUM_OFFSET:
        crc = f2fs_crc32(block[offset + 4:BLOCK_SIZE], seed=crc)
    return crc, offset


def test_bitmap_bit(bitmap, nr):
    """F2FS version bitmaps index bits MSB-first within each byte."""
    byte = bitmap[nr >> 3]
    return bool(byte & (1 << (7 - (nr & 7))))


def set_bitmap_bit(bitmap, nr):
    bitmap[nr >> 3] |= 1 << (7 - (nr & 7))
