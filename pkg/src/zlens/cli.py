"""zlens command-line interface.

Subcommands mirror the four analysis tools plus fixture generation,
simulation, and contract checking. Every run lands its artifacts in the
--out directory together with a manifest.json naming them.

Exit codes: 0 clean, 1 input/integrity error, 2 usage, 3 violations found.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, aggregate as agg_mod, contracts, timeline as tl_mod, trace
from . import fixtures as fixtures_mod
from . import zone_model as zm
from .errors import InputError, ZlensError
from .extent_map import (
    file_stats,
    load_extent_dump,
    map_to_zones,
    placement_csv,
    stats_csv,
    stats_report,
)
from .f2fs import (
    imap_csv,
    load_segment_info,
    locate_inode,
    parse_checkpoint,
    parse_superblock,
    segmap,
    segmap_file_csv,
    segmap_segment_csv,
)
from .f2fs.image import UnallocatedError
from .f2fs.layout import BLOCK_SIZE
from .geometry import load_geometry
from .render import HeatmapSpec, LaneChartSpec, histogram_svg, render_heatmap, render_timeline
from .snapshots import check_series, load_snapshot

log = logging.getLogger("zlens.cli")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_USAGE = 2
EXIT_VIOLATIONS = 3


class _Run:
    """Collects artifacts for one subcommand run under the output directory."""

    def __init__(self, outdir, command):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.artifacts = []

    def write(self, name, data):
        path = self.outdir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(data, bytes):
            path.write_bytes(data)
        else:
            path.write_text(data, encoding="utf-8")
        self.artifacts.append(name)
        return path

    def path(self, name):
        self.artifacts.append(name)
        return self.outdir / name

    def finish(self, extra=None):
        manifest = {"command": self.command,
                    "artifacts": sorted(self.artifacts)}
        if extra:
            manifest.update(extra)
        (self.outdir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
        print(f"{self.command}: wrote {len(self.artifacts)} artifact(s) "
              f"to {self.outdir}")


def _require_paths(*paths):
    for p in paths:
        if p is not None and not Path(p).exists():
            raise InputError(f"input path does not exist: {p}")


def _load_thresholds(args):
    if getattr(args, "thresholds", None):
        _require_paths(args.thresholds)
        return contracts.load_thresholds(args.thresholds)
    return contracts.Thresholds()


def _main_start(args):
    if getattr(args, "image", None):
        _require_paths(args.image)
        sb = parse_superblock(args.image)
        return sb.main_blkaddr * BLOCK_SIZE
    return args.main_start


def cmd_fiemap(args):
    _require_paths(args.geometry, args.extents)
    geometry = load_geometry(args.geometry)
    maps = load_extent_dump(args.extents)
    stats = [file_stats(m, geometry) for m in maps]
    placement = map_to_zones(geometry, maps)
    run = _Run(args.out, "fiemap")
    run.write("stats.csv", stats_csv(stats))
    run.write("placement.csv", placement_csv(placement))
    run.write("report.txt", stats_report(stats))
    run.finish()
    return EXIT_OK


def cmd_segmap(args):
    _require_paths(args.geometry, args.extents, args.segments)
    geometry = load_geometry(args.geometry)
    main_start = _main_start(args)
    maps = load_extent_dump(args.extents)
    segments = load_segment_info(args.segments, geometry, main_start)
    report = segmap(maps, segments, geometry, main_start)
    run = _Run(args.out, "segmap")
    run.write("segmap_segments.csv", segmap_segment_csv(report))
    run.write("segmap_files.csv", segmap_file_csv(report))
    lines = [f"files spanning multiple hotness classes: "
             f"{', '.join(report.mixed_files()) or 'none'}"]
    if report.exclusions:
        lines.append(f"excluded extent slices: {len(report.exclusions)}")
        for exc in report.exclusions:
            lines.append(f"  {exc[0]} logical {exc[1]} phys {exc[2]} "
                         f"len {exc[3]}: {exc[4]}")
    run.write("report.txt", "\n".join(lines) + "\n")
    run.finish()
    return EXIT_OK


def _parse_nids(args, manifest_path):
    nids = []
    if args.nids:
        for part in args.nids.split(","):
            nids.append(int(part.strip(), 0))
    if manifest_path:
        _require_paths(manifest_path)
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        nids.extend(int(n) for n in manifest.get("nids", {}))
    if not nids:
        raise InputError("imap needs --nids or --manifest")
    return sorted(set(nids))


def cmd_imap(args):
    _require_paths(args.image)
    geometry = load_geometry(args.geometry) if args.geometry else None
    if args.geometry:
        _require_paths(args.geometry)
    sb = parse_superblock(args.image)
    cp = parse_checkpoint(args.image, sb)
    locations = []
    errors = []
    for nid in _parse_nids(args, args.manifest):
        try:
            locations.append(locate_inode(args.image, sb, cp, nid, geometry))
        except UnallocatedError as exc:
            errors.append(str(exc))
    run = _Run(args.out, "imap")
    run.write("imap.csv", imap_csv(locations))
    lines = [f"superblock: magic {sb.magic:#x} (copy at byte {sb.source_offset}), "
             f"checkpoint version {cp.version} (pack {cp.pack_index})"]
    for loc in locations:
        status = "ok" if loc.verified else f"STALE_NAT footer={loc.footer_nid}"
        lines.append(f"nid {loc.nid}: block {loc.block_addr} "
                     f"segment {loc.segment} zone {loc.zone} [{status}]")
    lines.extend(errors)
    run.write("report.txt", "\n".join(lines) + "\n")
    run.finish()
    return EXIT_OK


def cmd_trace_report(args):
    _require_paths(args.geometry, args.trace)
    geometry = load_geometry(args.geometry)
    events = trace.load_trace(args.trace, geometry)
    agg = agg_mod.aggregate(events, geometry, window_ns=args.window)
    run = _Run(args.out, "trace-report")
    run.write("zones.csv", agg_mod.zones_csv(agg))
    run.write("resets.csv", agg_mod.resets_csv(agg))
    run.write("histogram.csv", agg_mod.histogram_csv(agg))
    run.write("histogram_zones.csv", agg_mod.histogram_csv(agg, per_zone=True))
    if args.window:
        run.write("windows.csv", agg_mod.windows_csv(agg))
    spec = HeatmapSpec(columns=args.columns, scale=args.scale,
                       title="zone resets")
    svg, csv = render_heatmap(agg.reset_vector(), spec)
    run.write("heatmap.svg", svg)
    assert csv == agg_mod.resets_csv(agg)
    hist = agg.totals().histogram
    run.write("histogram.svg", histogram_svg(hist, title="I/O sizes"))
    if args.png:
        from .render import figures
        figures.heatmap_png(agg.reset_vector(), run.path("heatmap.png"),
                            columns=args.columns, scale=args.scale,
                            title="zone resets")
        figures.histogram_png(hist, run.path("histogram.png"),
                              title="I/O sizes")
    totals = agg.totals()
    dev_events = sum(sum(a.op_counts.values()) for a in agg.zones.values())
    report = [
        f"events: {dev_events} DEV, "
        f"{agg.app_fs_events} APP/FS, {agg.unknown_actions} unknown zone actions",
        f"bytes written {totals.bytes_written}, read {totals.bytes_read}, "
        f"resets {totals.reset_count}",
        f"zones touched: {len(agg.zones)} of {geometry.nr_zones}",
    ]
    run.write("report.txt", "\n".join(report) + "\n")
    run.finish()
    return EXIT_OK


def _load_snapshots(args, geometry):
    snaps = []
    for spec in args.snapshot or []:
        parts = spec.split(":")
        if len(parts) not in (2, 3):
            raise InputError(
                f"--snapshot wants EXTENTS:SEGMENTS[:TS], got {spec!r}")
        _require_paths(parts[0], parts[1])
        ts = int(parts[2]) if len(parts) == 3 else None
        snaps.append(load_snapshot(parts[0], parts[1], geometry,
                                   args.main_start, ts))
    return snaps


def cmd_timeline(args):
    _require_paths(args.geometry, args.trace)
    geometry = load_geometry(args.geometry)
    events = trace.load_trace(args.trace, geometry)
    snapshots = _load_snapshots(args, geometry)
    tl = tl_mod.build_timeline(events, snapshots or None, geometry)
    run = _Run(args.out, "timeline")
    run.write("timeline.jsonl", tl_mod.timeline_lines(tl))
    spec = LaneChartSpec(filter_trivial=args.filter_trivial, title="event timeline")
    svg, text = render_timeline(tl, spec)
    run.write("lanechart.svg", svg)
    run.write("timeline.txt", text)
    run.write("lineage.json", json.dumps(
        [{"output": l.output, "inputs": list(l.inputs), "level": l.level,
          "ts_begin": l.ts_begin, "ts_end": l.ts_end, "cid": l.cid}
         for l in tl.lineage], indent=2, sort_keys=True) + "\n")
    if args.png:
        from .render import figures
        figures.lanechart_png(tl, run.path("lanechart.png"),
                              filter_trivial=args.filter_trivial,
                              title="event timeline")
    if tl.warnings:
        run.write("warnings.txt", "\n".join(tl.warnings) + "\n")
    run.finish()
    return EXIT_OK


def cmd_check(args):
    _require_paths(args.geometry)
    geometry = load_geometry(args.geometry)
    thresholds = _load_thresholds(args)
    main_start = _main_start(args)
    reports = []

    events = None
    if args.trace:
        _require_paths(args.trace)
        events = trace.load_trace(args.trace, geometry)
        agg = agg_mod.aggregate(events, geometry)
        reports.extend(contracts.check_request_scale(agg, thresholds))
        reports.extend(contracts.check_lifetime(agg, thresholds))

    if args.extents:
        _require_paths(args.extents)
        maps = load_extent_dump(args.extents)
        stats = [file_stats(m, geometry) for m in maps]
        reports.extend(contracts.check_locality(stats, thresholds))
        if args.segments:
            _require_paths(args.segments)
            segments = load_segment_info(args.segments, geometry, main_start)
            seg_report = segmap(maps, segments, geometry, main_start)
            reports.extend(contracts.check_grouping(
                seg_report, events, thresholds, geometry.block_size))

    snaps = _load_snapshots(args, geometry)
    if snaps:
        check_series(snaps)
        reports.extend(contracts.check_gc_reclassification(snaps, geometry))

    reports = contracts._sort_reports(reports)
    run = _Run(args.out, "check")
    run.write("reports.jsonl", contracts.reports_to_lines(reports))
    summary = contracts.summary_text(reports)
    run.write("summary.txt", summary)
    run.finish(extra={"violations": sum(
        1 for r in reports if r.severity == contracts.VIOLATION)})
    sys.stdout.write(summary)
    return EXIT_VIOLATIONS if contracts.has_violation(reports) else EXIT_OK


def cmd_simulate(args):
    _require_paths(args.geometry, args.script)
    geometry = load_geometry(args.geometry)
    script = zm.load_script(args.script)
    final, events, _ = zm.run_script(geometry, script)
    run = _Run(args.out, "simulate")
    run.write("trace.jsonl", "".join(e.to_line() + "\n" for e in events))
    run.write("state.json", json.dumps(zm.state_summary(final), indent=2,
                                       sort_keys=True) + "\n")
    run.finish()
    return EXIT_OK


def cmd_fixtures(args):
    run = _Run(args.out, "fixtures")
    written = fixtures_mod.write_fixture_suite(run.outdir)
    run.artifacts.extend(written)
    run.finish()
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="zlens",
        description="Zone-level placement, tracing, and contract analysis "
                    "for ZNS SSDs and F2FS.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(fn=fn)
        p.add_argument("--out", required=True,
                       help="output directory (all artifacts land here)")
        return p

    p = add("fiemap", cmd_fiemap,
            "map file extents to zones; fragmentation and hole statistics")
    p.add_argument("--geometry", required=True, help="geometry key=value file")
    p.add_argument("--extents", required=True, help="extent dump file")

    p = add("segmap", cmd_segmap,
            "join file extents with segment hotness classes")
    p.add_argument("--geometry", required=True)
    p.add_argument("--extents", required=True)
    p.add_argument("--segments", required=True, help="segment-info dump")
    p.add_argument("--image", help="F2FS image to read the main-area start from")
    p.add_argument("--main-start", type=int, default=0,
                   help="main-area start byte when no image is given")

    p = add("imap", cmd_imap, "locate inodes in an F2FS image via the NAT")
    p.add_argument("--image", required=True)
    p.add_argument("--geometry", help="geometry file (enables zone mapping)")
    p.add_argument("--nids", help="comma-separated node ids")
    p.add_argument("--manifest", help="fixture manifest.json listing nids")

    p = add("trace-report", cmd_trace_report,
            "aggregate a trace into per-zone counters, histograms, heatmap")
    p.add_argument("--geometry", required=True)
    p.add_argument("--trace", required=True, help="canonical trace file")
    p.add_argument("--window", type=int,
                   help="window size in ns for a per-window time series")
    p.add_argument("--scale", type=int,
                   help="fixed heatmap scale (default: auto)")
    p.add_argument("--columns", type=int, default=8, help="heatmap grid width")
    p.add_argument("--png", action=argparse.BooleanOptionalAction, default=True,
                   help="also render PNG figures")

    p = add("timeline", cmd_timeline,
            "cross-layer timeline with compaction lineage and lane chart")
    p.add_argument("--geometry", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--snapshot", action="append", metavar="EXTENTS:SEGMENTS[:TS]",
                   help="placement snapshot pair; repeat in time order")
    p.add_argument("--main-start", type=int, default=0)
    p.add_argument("--filter-trivial", action="store_true",
                   help="hide trivial promotion compactions in the chart")
    p.add_argument("--png", action=argparse.BooleanOptionalAction, default=True)

    p = add("check", cmd_check, "run contract checkers over available inputs")
    p.add_argument("--geometry", required=True)
    p.add_argument("--trace")
    p.add_argument("--extents")
    p.add_argument("--segments")
    p.add_argument("--snapshot", action="append", metavar="EXTENTS:SEGMENTS[:TS]")
    p.add_argument("--image")
    p.add_argument("--main-start", type=int, default=0)
    p.add_argument("--thresholds", help="thresholds key=value file")

    p = add("simulate", cmd_simulate,
            "run a workload script through the zone simulator")
    p.add_argument("--geometry", required=True)
    p.add_argument("--script", required=True, help="workload script file")

    add("fixtures", cmd_fixtures, "emit the bundled fixture suite")

    return parser


def main(argv=None):
    level = os.environ.get("ZLENS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ZlensError as exc:
        print(f"zlens: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
