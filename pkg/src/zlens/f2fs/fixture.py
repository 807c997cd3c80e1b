"""Generator for minimal valid F2FS images with a ground-truth manifest.

Desk-scale stand-in for a formatter: superblock x2, two checkpoint packs,
paired NAT segments, node pages with footers. The sidecar manifest records
where every nid landed so parser tests have an oracle.
"""

import struct

from ..units import MiB
from . import layout
from .layout import (
    BLOCK_SIZE,
    BLOCKS_PER_SEGMENT,
    CP_BITMAP_OFFSET,
    CP_CHKSUM_OFFSET,
    MAGIC,
    NAT_ENTRIES_PER_BLOCK,
    NAT_ENTRY_STRUCT,
    NODE_FOOTER_OFFSET,
    NODE_FOOTER_STRUCT,
    SB_BACKUP_OFFSET,
    SB_OFFSET,
    SB_STRUCT,
    f2fs_crc32,
    set_bitmap_bit,
)

# Fixed metadata layout, in blocks.
_SEG0_BLKADDR = 512
_CP_BLKADDR = 512          # packs at segments 1 and 2
_SIT_BLKADDR = 1536        # 2 segments
_NAT_BLKADDR = 2560        # 2 segments: primary copies + shadows
_SSA_BLKADDR = 3584        # 1 segment
_MAIN_BLKADDR = 4096

_SEGMENT_CLASSES = ("HOT_DATA", "HOT_NODE", "WARM_DATA", "COLD_DATA",
                    "WARM_NODE", "COLD_NODE")

_STALE_NID_SKEW = 7777


def _pack_superblock(total_blocks, nr_main_segments):
    return SB_STRUCT.pack(
        MAGIC, 1, 0,                    # magic, major, minor
        9, 3, 12, 9, 1, 1, 0,           # sector/block/segment shape, checksum off
        total_blocks,
        nr_main_segments,               # section_count
        (total_blocks - _SEG0_BLKADDR) // BLOCKS_PER_SEGMENT,
        2, 2, 2, 1,                     # ckpt, sit, nat, ssa segment counts
        nr_main_segments,
        _SEG0_BLKADDR, _CP_BLKADDR, _SIT_BLKADDR, _NAT_BLKADDR,
        _SSA_BLKADDR, _MAIN_BLKADDR,
        3, 1, 2,                        # root/node/meta ino
    )


def _pack_checkpoint(version, nat_bitmap, next_free_nid):
    sit_bm_bytes = BLOCKS_PER_SEGMENT // 8  # one SIT block pair
    nat_bm_bytes = len(nat_bitmap)
    block = bytearray(BLOCK_SIZE)
    layout.CP_STRUCT.pack_into(
        block, 0,
        version, 0, 0,                  # versions / block counts
        0, 0, 0,                        # rsvd / overprov / free segments
        *([0] * 8), *([0] * 8),         # cur_node segno/blkoff
        *([0] * 8), *([0] * 8),         # cur_data segno/blkoff
        0,                              # ckpt_flags
        1,                              # cp_pack_total_block_count
        0, 0, 0,                        # start_sum, valid_node, valid_inode
        next_free_nid,
        sit_bm_bytes, nat_bm_bytes, CP_CHKSUM_OFFSET,
        0, b"\0" * 16,                  # elapsed_time, alloc_type
    )
    block[CP_BITMAP_OFFSET + sit_bm_bytes:
          CP_BITMAP_OFFSET + sit_bm_bytes + nat_bm_bytes] = nat_bitmap
    crc = f2fs_crc32(bytes(block[:CP_CHKSUM_OFFSET]))
    struct.pack_into("<I", block, CP_CHKSUM_OFFSET, crc)
    return bytes(block)


def build_fixture_image(path, *, nr_main_segments=8, nids=(3, 4, 5, 6),
                        node_segment=1, corrupt_primary_sb=False,
                        corrupt_second_pack=False, stale_nids=(),
                        nat_blocks_on_second_copy=(0,), zone_size=2 * MiB):
    """Write an image to `path`; returns (manifest, segment_info_text).

    Node pages for `nids` land consecutively in main segment `node_segment`.
    NAT blocks listed in nat_blocks_on_second_copy have their checkpoint
    bitmap bit set and their live entries written to the shadow segment
    (decoy zero entries go to the primary). stale_nids get a node footer
    that disagrees with the NAT.
    """
    nids = sorted(set(nids))
    stale_nids = set(stale_nids)
    if stale_nids - set(nids):
        raise ValueError("stale_nids must be a subset of nids")
    if not 0 <= node_segment < nr_main_segments:
        raise ValueError("node_segment outside the main area")
    total_blocks = _MAIN_BLKADDR + nr_main_segments * BLOCKS_PER_SEGMENT
    total_bytes = total_blocks * BLOCK_SIZE
    if zone_size % BLOCK_SIZE or total_bytes % zone_size:
        raise ValueError("zone_size must divide the image span")

    second_copy = set(nat_blocks_on_second_copy)
    nat_bitmap = bytearray(BLOCKS_PER_SEGMENT // 8)
    for block_off in second_copy:
        set_bitmap_bit(nat_bitmap, block_off)

    sb = _pack_superblock(total_blocks, nr_main_segments)
    pack0 = _pack_checkpoint(4, nat_bitmap, max(nids) + 1)
    pack1 = _pack_checkpoint(5, nat_bitmap, max(nids) + 1)
    if corrupt_second_pack:
        pack1 = pack1[:CP_CHKSUM_OFFSET] + b"\xde\xad\xbe\xef"

    # NAT blocks, keyed by (block_off, live); live=False holds decoys.
    nat_blocks = {}
    node_base = _MAIN_BLKADDR + node_segment * BLOCKS_PER_SEGMENT
    manifest_nids = {}
    for i, nid in enumerate(nids):
        block_addr = node_base + i
        block_off = nid // NAT_ENTRIES_PER_BLOCK
        entry_off = nid % NAT_ENTRIES_PER_BLOCK
        live = nat_blocks.setdefault((block_off, True), bytearray(BLOCK_SIZE))
        NAT_ENTRY_STRUCT.pack_into(live, entry_off * NAT_ENTRY_STRUCT.size,
                                   1, nid, block_addr)
        if block_off in second_copy:
            # decoy in the primary copy: all-zero entry already there
            nat_blocks.setdefault((block_off, False), bytearray(BLOCK_SIZE))
        manifest_nids[nid] = {
            "block_addr": block_addr,
            "byte_addr": block_addr * BLOCK_SIZE,
            "segment": node_segment,
            "zone": block_addr * BLOCK_SIZE // zone_size,
            "stale": nid in stale_nids,
        }

    with open(path, "wb") as fh:
        fh.truncate(total_bytes)
        if corrupt_primary_sb:
            fh.seek(SB_OFFSET)
            fh.write(b"\xba\xdf\x00\x0d" + b"\0" * (SB_STRUCT.size - 4))
        else:
            fh.seek(SB_OFFSET)
            fh.write(sb)
        fh.seek(SB_BACKUP_OFFSET)
        fh.write(sb)
        fh.seek(_CP_BLKADDR * BLOCK_SIZE)
        fh.write(pack0)
        fh.seek((_CP_BLKADDR + BLOCKS_PER_SEGMENT) * BLOCK_SIZE)
        fh.write(pack1)
        for (block_off, live), block in sorted(nat_blocks.items()):
            primary = _NAT_BLKADDR \
                + (block_off // BLOCKS_PER_SEGMENT) * 2 * BLOCKS_PER_SEGMENT \
                + block_off % BLOCKS_PER_SEGMENT
            shadow = primary + BLOCKS_PER_SEGMENT
            on_second = block_off in second_copy
            live_addr, decoy_addr = (shadow, primary) if on_second else (primary, shadow)
            fh.seek((live_addr if live else decoy_addr) * BLOCK_SIZE)
            fh.write(block)
        for i, nid in enumerate(nids):
            block_addr = node_base + i
            footer_nid = nid + _STALE_NID_SKEW if nid in stale_nids else nid
            fh.seek(block_addr * BLOCK_SIZE + NODE_FOOTER_OFFSET)
            fh.write(NODE_FOOTER_STRUCT.pack(footer_nid, nid, 0,
                                             5 if not corrupt_second_pack else 4, 0))

    seg_lines = []
    node_count = {node_segment: len(nids)}
    for seg in range(nr_main_segments):
        cls = "HOT_NODE" if seg == node_segment \
            else _SEGMENT_CLASSES[seg % len(_SEGMENT_CLASSES)]
        seg_lines.append(f"{seg} {cls} {node_count.get(seg, (seg * 37) % 200)}")
    segment_info = "\n".join(seg_lines) + "\n"

    manifest = {
        "image_bytes": total_bytes,
        "block_size": BLOCK_SIZE,
        "zone_size": zone_size,
        "nr_zones": total_bytes // zone_size,
        "main_blkaddr": _MAIN_BLKADDR,
        "main_start_byte": _MAIN_BLKADDR * BLOCK_SIZE,
        "expected_cp_version": 4 if corrupt_second_pack else 5,
        "corrupt_primary_sb": corrupt_primary_sb,
        "nat_blocks_on_second_copy": sorted(second_copy),
        "stale_nids": sorted(stale_nids),
        "nids": manifest_nids,
    }
    return manifest, segment_info
