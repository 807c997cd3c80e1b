import hashlib
import random
import shutil
import subprocess

import pytest

from zlens.errors import IntegrityError, NotF2FSError, ParseError, RangeError
from zlens.extent_map import Extent, FileMap
from zlens.f2fs import (
    build_fixture_image,
    load_segment_info,
    locate_inode,
    parse_checkpoint,
    parse_superblock,
    read_nat_entry,
    segmap,
)
from zlens.f2fs.image import UnallocatedError
from zlens.f2fs.layout import (
    BLOCK_SIZE,
    SB_OFFSET,
    SEGMENT_BYTES,
    f2fs_crc32,
)
from zlens.geometry import ZoneGeometry
from zlens.units import KiB, MiB


@pytest.fixture
def image(tmp_path):
    path = tmp_path / "fixture.img"
    manifest, seginfo = build_fixture_image(
        path, nids=(3, 4, 5, 120, 900), stale_nids=(900,),
        nat_blocks_on_second_copy=(0, 1))
    geometry = ZoneGeometry(block_size=manifest["block_size"],
                            zone_size=manifest["zone_size"],
                            nr_zones=manifest["nr_zones"])
    return path, manifest, seginfo, geometry


def test_fixture_magic(image):
    path, manifest, _, _ = image
    sb = parse_superblock(str(path))
    assert sb.magic == 0xF2F52010
    assert sb.source_offset == SB_OFFSET
    assert sb.main_blkaddr == manifest["main_blkaddr"]


def test_zeroed_image_not_f2fs(tmp_path):
    path = tmp_path / "zero.img"
    path.write_bytes(b"\0" * (64 * KiB))
    with pytest.raises(NotF2FSError) as exc:
        parse_superblock(str(path))
    assert "0x0" in str(exc.value)


def test_backup_superblock_fallback(tmp_path):
    path = tmp_path / "corrupt.img"
    build_fixture_image(path, corrupt_primary_sb=True)
    sb = parse_superblock(str(path))
    assert sb.source_offset == SB_OFFSET + BLOCK_SIZE


def test_superblock_pack_is_position_exact(image):
    path, _, _, _ = image
    raw = path.read_bytes()
    sb = parse_superblock(str(path))
    assert sb.pack() == raw[SB_OFFSET:SB_OFFSET + len(sb.pack())]


def test_checkpoint_selection_prefers_higher_valid_version(tmp_path, image):
    path, manifest, _, _ = image
    cp = parse_checkpoint(str(path), parse_superblock(str(path)))
    assert cp.version == manifest["expected_cp_version"] == 5
    assert cp.pack_index == 1

    broken = tmp_path / "broken_pack.img"
    manifest2, _ = build_fixture_image(broken, corrupt_second_pack=True)
    cp2 = parse_checkpoint(str(broken), parse_superblock(str(broken)))
    assert cp2.version == manifest2["expected_cp_version"] == 4
    assert cp2.pack_index == 0


def test_locate_inode_matches_manifest(image):
    path, manifest, _, geometry = image
    sb = parse_superblock(str(path))
    cp = parse_checkpoint(str(path), sb)
    for nid, want in manifest["nids"].items():
        loc = locate_inode(str(path), sb, cp, int(nid), geometry)
        assert loc.block_addr == want["block_addr"]
        assert loc.byte_addr == want["byte_addr"]
        assert loc.segment == want["segment"]
        assert loc.zone == want["zone"]
        assert loc.verified == (not want["stale"])


def test_nid_out_of_range(image):
    path, _, _, _ = image
    sb = parse_superblock(str(path))
    cp = parse_checkpoint(str(path), sb)
    with pytest.raises(RangeError):
        locate_inode(str(path), sb, cp, sb.nat_capacity, None)


def test_unallocated_nid(image):
    path, _, _, _ = image
    sb = parse_superblock(str(path))
    cp = parse_checkpoint(str(path), sb)
    entry = read_nat_entry(str(path), sb, cp, 7)
    assert entry.block_addr == 0
    with pytest.raises(UnallocatedError):
        locate_inode(str(path), sb, cp, 7, None)


def test_parsing_is_read_only(image):
    path, manifest, _, geometry = image
    before = hashlib.sha256(path.read_bytes()).hexdigest()
    sb = parse_superblock(str(path))
    cp = parse_checkpoint(str(path), sb)
    for nid in manifest["nids"]:
        locate_inode(str(path), sb, cp, int(nid), geometry)
    assert hashlib.sha256(path.read_bytes()).hexdigest() == before


def test_crc_matches_reference_bit_loop():
    def reference(data, seed=0xF2F52010):
        crc = seed
        for byte in data:
            crc ^= byte
            for _ in range(8):
                crc = (crc >> 1) ^ (0xEDB88320 if crc & 1 else 0)
        return crc

    for blob in (b"", b"f2fs", bytes(range(256)) * 3):
        assert f2fs_crc32(blob) == reference(blob)


def test_segment_info_parse_line():
    records = load_segment_info("512 WARM_DATA 300\n")
    assert (records[0].index, records[0].hotness, records[0].valid_blocks) \
        == (512, "WARM_DATA", 300)


def test_all_six_classes():
    text = "\n".join(f"{i} {cls} {i}" for i, cls in enumerate(
        ("HOT_DATA", "WARM_DATA", "COLD_DATA",
         "HOT_NODE", "WARM_NODE", "COLD_NODE"))) + "\n"
    records = load_segment_info(text)
    assert sorted(r.hotness for r in records) == sorted(
        ("HOT_DATA", "WARM_DATA", "COLD_DATA",
         "HOT_NODE", "WARM_NODE", "COLD_NODE"))


def test_segment_info_errors():
    with pytest.raises(ParseError) as exc:
        load_segment_info("0 LUKEWARM_DATA 1\n")
    assert "LUKEWARM_DATA" in str(exc.value)
    with pytest.raises(ParseError):
        load_segment_info("0 HOT_DATA\n")
    with pytest.raises(IntegrityError):
        load_segment_info("0 HOT_DATA 1\n0 COLD_DATA 1\n")
    with pytest.raises(IntegrityError):
        load_segment_info("0 HOT_DATA 513\n")  # > blocks per segment


def test_segment_zone_mapping_brute_force():
    g = ZoneGeometry(block_size=4096, zone_size=8 * MiB, nr_zones=16)
    main_start = 4 * MiB
    text = "".join(f"{i} WARM_DATA 0\n" for i in range(62))
    records = load_segment_info(text, g, main_start)
    for rec in records:
        start = main_start + rec.index * SEGMENT_BYTES
        assert rec.zone == start // g.zone_size
        # segment never straddles a zone when zone_size % 2MiB == 0
        assert (start + SEGMENT_BYTES - 1) // g.zone_size == rec.zone


def test_segmap_single_file_single_class():
    g = ZoneGeometry(block_size=4096, zone_size=2 * MiB, nr_zones=16)
    maps = [FileMap("a", 1 * MiB, (Extent("a", 0, 0, 1 * MiB),))]
    report = segmap(maps, load_segment_info("0 WARM_DATA 10\n", g), g)
    assert report.per_file["a"] == {"WARM_DATA": 1}
    assert report.mixed_files() == []
    assert report.per_segment[0].slice_count == 1


def test_segmap_footer_mix():
    g = ZoneGeometry(block_size=4096, zone_size=2 * MiB, nr_zones=16)
    maps = [FileMap("sst", 2 * MiB + 4 * KiB, (
        Extent("sst", 0, 0, 2 * MiB),
        Extent("sst", 2 * MiB, 4 * MiB, 4 * KiB),
    ))]
    segments = load_segment_info("0 WARM_DATA 0\n2 HOT_DATA 0\n", g)
    report = segmap(maps, segments, g)
    assert report.per_file["sst"] == {"WARM_DATA": 1, "HOT_DATA": 1}
    assert report.mixed_files() == ["sst"]


def test_segmap_exclusions():
    g = ZoneGeometry(block_size=4096, zone_size=2 * MiB, nr_zones=16)
    maps = [FileMap("a", 4 * MiB, (
        Extent("a", 0, 1 * MiB, 1 * MiB),          # before main area
        Extent("a", 1 * MiB, 3 * MiB, 1 * MiB),    # segment 0 of main
        Extent("a", 2 * MiB, 9 * MiB, 1 * MiB),    # unlisted segment
    ))]
    segments = load_segment_info("0 COLD_DATA 0\n", g, main_start=2 * MiB)
    report = segmap(maps, segments, g, main_start=2 * MiB)
    assert len(report.exclusions) == 2
    assert report.per_file["a"] == {"COLD_DATA": 1}


def _overlap_oracle(maps, segments, main_start):
    """O(n^2): per segment, count extent pieces overlapping its byte range."""
    counts = {}
    for rec in segments:
        lo = main_start + rec.index * SEGMENT_BYTES
        hi = lo + SEGMENT_BYTES
        n = 0
        for fmap in maps:
            for ext in fmap.extents:
                if ext.unwritten:
                    continue
                if ext.physical_start < hi and ext.physical_end > lo:
                    n += 1
        counts[rec.index] = n
    return counts


def test_segmap_slice_counts_match_overlap_oracle():
    rng = random.Random(99)
    g = ZoneGeometry(block_size=4096, zone_size=2 * MiB, nr_zones=32)
    segments = load_segment_info(
        "".join(f"{i} {'WARM_DATA' if i % 2 else 'COLD_DATA'} 0\n"
                for i in range(32)), g)
    maps = []
    for i in range(60):
        blocks = rng.randint(1, 700)
        start = rng.randint(0, g.device_span // 4096 - blocks)
        e = Extent(f"f{i}", 0, start * 4096, blocks * 4096)
        maps.append(FileMap(f"f{i}", e.length, (e,)))
    report = segmap(maps, segments, g)
    oracle = _overlap_oracle(maps, segments, 0)
    got = {idx: join.slice_count for idx, join in report.per_segment.items()}
    assert got == oracle


def test_fixture_segment_dump_is_loadable(image):
    path, manifest, seginfo, geometry = image
    records = load_segment_info(seginfo, geometry,
                                manifest["main_start_byte"])
    assert len(records) == 8
    assert records[1].hotness == "HOT_NODE"


@pytest.mark.skipif(shutil.which("mkfs.f2fs") is None,
                    reason="no F2FS formatter on this host")
def test_real_formatter_image(tmp_path):
    img = tmp_path / "real.img"
    with open(img, "wb") as fh:
        fh.truncate(128 * MiB)
    subprocess.run(["mkfs.f2fs", "-f", str(img)], check=True,
                   capture_output=True)
    sb = parse_superblock(str(img))
    assert sb.magic == 0xF2F52010
    cp = parse_checkpoint(str(img), sb)
    loc = locate_inode(str(img), sb, cp, sb.root_ino, None)
    assert loc.verified
    assert loc.block_addr >= sb.main_blkaddr
