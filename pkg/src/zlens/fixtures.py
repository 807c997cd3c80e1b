"""Desk-scale fixture generation: paper-shaped scenarios (reset-skew trace,
compaction timeline, SSTable footer, GC reclassification), a minimal F2FS
image, and randomized workloads/extent layouts with ground truth attached.
"""

import json
import random
from pathlib import Path

from . import trace, zone_model as zm
from .extent_map import Extent, FileMap, dump_to_text
from .f2fs.fixture import build_fixture_image
from .geometry import ZoneGeometry, geometry_to_text
from .units import KiB, MiB

MS = 1_000_000  # ns


def fig3_geometry():
    # The emulated device shape: 64 zones x 64MiB (4GiB); capacity==size and
    # 4KiB blocks are our fixture choices, not device ground truth.
    return ZoneGeometry(block_size=4096, zone_size=64 * MiB, nr_zones=64)


_BACKGROUND_RESET_ZONES = (1, 3, 5, 8, 13, 21, 34, 55)
_WRITE_ONLY_ZONES = (0, 7, 9, 40)
HOT_RESET_ZONE = 2
HOT_RESET_COUNT = 40
BACKGROUND_RESETS = 4


def fig3_script():
    """Workload whose reset profile concentrates on zone 2 (the warm-node
    zone shape): 40 resets there, 4 on each background zone, none elsewhere."""
    cmds = []
    ts = 0

    def emit(op, zone, length=None):
        nonlocal ts
        ts += 1000
        cmds.append(zm.Command(op, zone=zone, length=length, ts_ns=ts))

    for zone in _WRITE_ONLY_ZONES:
        for _ in range(4):
            emit(zm.WRITE, zone, 256 * KiB)
    rounds = max(HOT_RESET_COUNT, BACKGROUND_RESETS)
    for i in range(rounds):
        emit(zm.WRITE, HOT_RESET_ZONE, 16 * KiB)
        emit(zm.RESET, HOT_RESET_ZONE)
        if i < BACKGROUND_RESETS:
            for zone in _BACKGROUND_RESET_ZONES:
                emit(zm.WRITE, zone, 1 * MiB)
                emit(zm.RESET, zone)
    return cmds


def fig3_expected_resets():
    vec = [0] * 64
    vec[HOT_RESET_ZONE] = HOT_RESET_COUNT
    for zone in _BACKGROUND_RESET_ZONES:
        vec[zone] = BACKGROUND_RESETS
    return vec


def fig4_geometry():
    return ZoneGeometry(block_size=4096, zone_size=64 * MiB, nr_zones=64)


class _Fig4Builder:
    def __init__(self, geometry):
        self.geometry = geometry
        self.events = []
        self.ts = 0
        self.zone_wp = {}

    def _next(self):
        self.ts += MS
        return self.ts

    def app(self, op, **attrs):
        self.events.append(trace.TraceEvent(
            self._next(), trace.LAYER_APP, op,
            attrs={k: str(v) for k, v in attrs.items()}))

    def fs_write(self, file_id, length):
        self.events.append(trace.TraceEvent(
            self._next(), trace.LAYER_FS, trace.WRITE, length=length,
            attrs={"file": str(file_id)}))

    def fsync(self, file_id):
        self.events.append(trace.TraceEvent(
            self._next(), trace.LAYER_FS, trace.FSYNC,
            attrs={"file": str(file_id)}))

    def dev_write(self, zone, length):
        wp = self.zone_wp.get(zone, zone * self.geometry.zone_size)
        self.events.append(trace.TraceEvent(
            self._next(), trace.LAYER_DEV, trace.WRITE,
            addr=wp, length=length, zone=zone))
        self.zone_wp[zone] = wp + length

    def dev_reset(self, zone):
        self.events.append(trace.TraceEvent(
            self._next(), trace.LAYER_DEV, trace.RESET, zone=zone))
        self.zone_wp[zone] = zone * self.geometry.zone_size


def fig4_events():
    """Event stream for the SSTable lifetime narrative: flush creates 31,
    a trivial L0->L1 promotion of 31, compaction(31,33,34)->37, deletes,
    compaction(37,35,38)->{41,42}, deletes. Returns (events, ground truth)."""
    b = _Fig4Builder(fig4_geometry())
    zone_of = {"31": 3, "33": 4, "34": 5, "35": 6, "38": 7, "37": 9, "41": 10, "42": 11}

    def flush(file_id, zone):
        b.app(trace.FLUSH, files=file_id, level=0)
        b.fs_write(file_id, 2 * MiB)
        b.dev_write(zone, 2 * MiB)
        b.fsync(file_id)

    flush("31", zone_of["31"])
    for zone in (12, 13, 14):
        b.dev_reset(zone)
    flush("33", zone_of["33"])
    flush("34", zone_of["34"])
    flush("35", zone_of["35"])
    flush("38", zone_of["38"])

    # trivial promotion of 31 (L0 -> L1): inputs == outputs, no lineage edge
    b.app(trace.COMPACTION_BEGIN, files="31", level=1, cid="c0")
    b.app(trace.COMPACTION_END, files="31", cid="c0")

    b.app(trace.COMPACTION_BEGIN, files="31,33,34", level=2, cid="c1")
    b.fs_write("37", 4 * MiB)
    b.dev_write(zone_of["37"], 4 * MiB)
    b.app(trace.COMPACTION_END, files="37", cid="c1")
    for file_id in ("31", "33", "34"):
        b.app(trace.FILE_DELETE, file=file_id)
        b.dev_reset(zone_of[file_id])

    b.app(trace.COMPACTION_BEGIN, files="37,35,38", level=2, cid="c2")
    for out in ("41", "42"):
        b.fs_write(out, 3 * MiB)
        b.dev_write(zone_of[out], 3 * MiB)
    b.app(trace.COMPACTION_END, files="41,42", cid="c2")
    for file_id in ("37", "35", "38"):
        b.app(trace.FILE_DELETE, file=file_id)

    truth = {
        "edges": [
            {"inputs": ["31", "33", "34"], "output": "37", "cid": "c1"},
            {"inputs": ["35", "37", "38"], "output": "41", "cid": "c2"},
            {"inputs": ["35", "37", "38"], "output": "42", "cid": "c2"},
        ],
        "deletes": {"31": "c1", "33": "c1", "34": "c1",
                    "35": "c2", "37": "c2", "38": "c2"},
        "trivial_cids": ["c0"],
    }
    return b.events, truth


def footer_geometry():
    return ZoneGeometry(block_size=4096, zone_size=2 * MiB, nr_zones=16)


def footer_fixture(clean=False):
    """SSTable-footer scenario: 3MiB of WARM data plus a 4KiB tail.

    Dirty variant puts the tail in a HOT_DATA segment, written in its own
    sync epoch; clean variant keeps it physically adjacent in WARM_DATA.
    Returns dict with extents/segments/trace text.
    """
    file_id = "sst31"
    data = Extent(file_id, 0, 4 * MiB, 3 * MiB)
    if clean:
        tail = Extent(file_id, 3 * MiB, 7 * MiB, 4 * KiB, frozenset({"LAST"}))
    else:
        tail = Extent(file_id, 3 * MiB, 10 * MiB + 16 * KiB, 4 * KiB,
                      frozenset({"LAST"}))
    fmap = FileMap(file_id, 3 * MiB + 4 * KiB, (data, tail), snapshot_ts=1000)

    seg_classes = {2: "WARM_DATA", 3: "WARM_DATA", 5: "HOT_DATA"}
    seg_lines = [f"{idx} {cls} 100" for idx, cls in sorted(seg_classes.items())]

    t = [0]

    def ev(layer, op, length=None, **attrs):
        t[0] += MS
        return trace.TraceEvent(t[0], layer, op, length=length,
                                attrs={k: str(v) for k, v in attrs.items()})

    events = [
        ev(trace.LAYER_FS, trace.WRITE, length=3 * MiB, file=file_id),
        ev(trace.LAYER_FS, trace.FSYNC, file=file_id),
        ev(trace.LAYER_FS, trace.WRITE, length=4 * KiB, file=file_id),
        ev(trace.LAYER_FS, trace.FSYNC, file=file_id),
    ]
    return {
        "geometry": footer_geometry(),
        "extents": dump_to_text([fmap]),
        "segments": "\n".join(seg_lines) + "\n",
        "trace": "".join(e.to_line() + "\n" for e in events),
    }


def gc_geometry():
    return ZoneGeometry(block_size=4096, zone_size=2 * MiB, nr_zones=16)


def gc_fixture():
    """Two snapshots: a HOT file and a WARM file both migrate into one
    COLD_DATA segment (the GC reclassification shape)."""
    seg_classes = {0: "HOT_DATA", 1: "WARM_DATA", 4: "COLD_DATA", 5: "COLD_DATA"}
    seg_lines = "\n".join(f"{i} {c} 100" for i, c in sorted(seg_classes.items())) + "\n"

    before = [
        FileMap("fileA", 1 * MiB,
                (Extent("fileA", 0, 0, 1 * MiB),), snapshot_ts=1000),
        FileMap("fileB", 1 * MiB,
                (Extent("fileB", 0, 2 * MiB, 1 * MiB),), snapshot_ts=1000),
    ]
    after = [
        FileMap("fileA", 1 * MiB,
                (Extent("fileA", 0, 8 * MiB, 1 * MiB),), snapshot_ts=2000),
        FileMap("fileB", 1 * MiB,
                (Extent("fileB", 0, 9 * MiB, 1 * MiB),), snapshot_ts=2000),
    ]
    return {
        "geometry": gc_geometry(),
        "extents_a": dump_to_text(before),
        "extents_b": dump_to_text(after),
        "segments_a": seg_lines,
        "segments_b": seg_lines,
    }


_SIZES = (4 * KiB, 8 * KiB, 16 * KiB, 64 * KiB, 256 * KiB, 1 * MiB)
_OP_POPULATION = ((zm.WRITE,) * 40 + (zm.APPEND,) * 15 + (zm.READ,) * 15
                  + (zm.RESET,) * 12 + (zm.OPEN,) * 6 + (zm.CLOSE,) * 6
                  + (zm.FINISH,) * 6)


def random_script(geometry, n, seed):
    """n valid commands for the given geometry, deterministic per seed.

    Tracks device state alongside so every emitted command is accepted.
    """
    rng = random.Random(seed).random
    zones = list(zm.new_device(geometry).zones)
    open_count = 0
    cmds = []
    ts = 0
    nr_zones = geometry.nr_zones
    span_blocks = geometry.device_span // (4 * KiB)
    n_sizes = len(_SIZES)
    n_ops = len(_OP_POPULATION)
    while len(cmds) < n:
        ts += 1 + int(rng() * 1000)
        op = _OP_POPULATION[int(rng() * n_ops)]
        zone = int(rng() * nr_zones)
        z = zones[zone]
        if op in (zm.WRITE, zm.APPEND):
            room = z.start + geometry.zone_capacity - z.write_pointer
            if z.condition == zm.FULL or room < 4 * KiB:
                continue
            length = min(_SIZES[int(rng() * n_sizes)], room)
            cmd = zm.Command(op, zone=zone, length=length, ts_ns=ts)
        elif op == zm.READ:
            addr = int(rng() * span_blocks) * 4 * KiB
            length = min(_SIZES[int(rng() * n_sizes)],
                         geometry.device_span - addr)
            cmd = zm.Command(op, addr=addr, length=length, ts_ns=ts)
        elif op == zm.OPEN:
            if z.condition == zm.FULL:
                continue
            cmd = zm.Command(op, zone=zone, ts_ns=ts)
        elif op == zm.CLOSE:
            if z.condition not in (zm.IMPLICIT_OPEN, zm.EXPLICIT_OPEN, zm.CLOSED):
                continue
            cmd = zm.Command(op, zone=zone, ts_ns=ts)
        else:  # reset / finish are always accepted on writable zones
            cmd = zm.Command(op, zone=zone, ts_ns=ts)
        open_count, _, _ = zm._apply_mut(geometry, zones, open_count, cmd)
        cmds.append(cmd)
    return cmds


def random_extent_layout(geometry, n_files, seed):
    """Synthetic extent layout with ground truth: returns (FileMaps, dump text).

    Physical ranges are allocated from a moving cursor so they never overlap;
    some files get logical holes and UNWRITTEN extents.
    """
    rng = random.Random(seed)
    cursor = 0
    maps = []
    block = geometry.block_size
    for i in range(n_files):
        file_id = f"f{i:03d}"
        extents = []
        logical = 0
        n_ext = rng.randint(1, 6)
        for j in range(n_ext):
            if rng.random() < 0.2:
                logical += rng.randint(1, 8) * block  # logical hole
            length = rng.randint(1, 64) * block
            if cursor + length > geometry.device_span:
                cursor = 0
            flags = set()
            if rng.random() < 0.1:
                flags.add("UNWRITTEN")
            if j == n_ext - 1:
                flags.add("LAST")
            extents.append(Extent(file_id, logical, cursor, length,
                                  frozenset(flags)))
            cursor += length + rng.randint(0, 4) * block
            logical += length
        size = logical + (rng.randint(0, 2) * block)  # sometimes a trailing hole
        maps.append(FileMap(file_id, size, tuple(extents), snapshot_ts=777))
    return maps, dump_to_text(maps)


def write_fixture_suite(outdir):
    """Emit the full fixture suite under outdir; returns relative paths."""
    out = Path(outdir)
    written = []

    def save(rel, text):
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(text, bytes):
            path.write_bytes(text)
        else:
            path.write_text(text, encoding="utf-8")
        written.append(rel)

    g3 = fig3_geometry()
    script = fig3_script()
    final, events, _ = zm.run_script(g3, script)
    save("fig3/geometry.txt", geometry_to_text(g3))
    save("fig3/script.txt", zm.script_to_text(script))
    save("fig3/trace.jsonl", "".join(e.to_line() + "\n" for e in events))
    save("fig3/final_state.json",
         json.dumps(zm.state_summary(final), indent=2, sort_keys=True) + "\n")

    g4 = fig4_geometry()
    events4, truth = fig4_events()
    save("fig4/geometry.txt", geometry_to_text(g4))
    save("fig4/events.jsonl", "".join(e.to_line() + "\n" for e in events4))
    save("fig4/dag.json", json.dumps(truth, indent=2, sort_keys=True) + "\n")

    dirty = footer_fixture(clean=False)
    clean = footer_fixture(clean=True)
    save("footer/geometry.txt", geometry_to_text(dirty["geometry"]))
    save("footer/extents.txt", dirty["extents"])
    save("footer/segments.txt", dirty["segments"])
    save("footer/trace.jsonl", dirty["trace"])
    save("footer/clean_extents.txt", clean["extents"])
    save("footer/clean_segments.txt", clean["segments"])

    gc = gc_fixture()
    save("gc/geometry.txt", geometry_to_text(gc["geometry"]))
    save("gc/snapshot_a.extents", gc["extents_a"])
    save("gc/snapshot_a.segments", gc["segments_a"])
    save("gc/snapshot_b.extents", gc["extents_b"])
    save("gc/snapshot_b.segments", gc["segments_b"])

    (out / "f2fs").mkdir(parents=True, exist_ok=True)
    manifest, seginfo = build_fixture_image(
        out / "f2fs" / "image.img", nids=(3, 4, 5, 6), stale_nids=(6,),
        corrupt_primary_sb=False)
    written.append("f2fs/image.img")
    save("f2fs/manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    save("f2fs/segments.txt", seginfo)
    save("f2fs/geometry.txt", geometry_to_text(ZoneGeometry(
        block_size=manifest["block_size"], zone_size=manifest["zone_size"],
        nr_zones=manifest["nr_zones"])))

    layout_geom = footer_geometry()
    maps, dump = random_extent_layout(layout_geom, 50, seed=7)
    save("extents/geometry.txt", geometry_to_text(layout_geom))
    save("extents/dump.txt", dump)

    return written
