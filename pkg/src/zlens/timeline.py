"""Cross-layer event correlation: merge APP/FS/DEV events and placement
snapshots into one narrative, with compaction lineage and delete links."""

import json
from dataclasses import dataclass, field, replace

from . import trace
from .snapshots import file_placements

PLACEMENT = "PLACEMENT"


@dataclass(frozen=True, slots=True)
class TimelineEntry:
    index: int
    ts_ns: int
    lane: str
    kind: str
    files: tuple = ()
    zones: tuple = ()
    label: str = ""
    links: tuple = ()        # indices of causally related entries
    link_kinds: tuple = ()   # parallel to links: pair | superseded_by
    cid: str | None = None   # compaction correlation id, when applicable
    trivial: bool = False    # compaction that only promoted files
    dangling: bool = False   # unmatched begin/end

    def to_record(self):
        return {
            "index": self.index,
            "ts_ns": self.ts_ns,
            "lane": self.lane,
            "kind": self.kind,
            "files": list(self.files),
            "zones": list(self.zones),
            "label": self.label,
            "links": list(self.links),
            "link_kinds": list(self.link_kinds),
            "cid": self.cid,
            "trivial": self.trivial,
            "dangling": self.dangling,
        }

    def to_line(self):
        return json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True, slots=True)
class CompactionLineage:
    output: str
    inputs: tuple
    level: int | None
    ts_begin: int
    ts_end: int
    cid: str

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("compaction lineage needs inputs")
        if not self.ts_begin < self.ts_end:
            raise ValueError("compaction must end after it begins")


@dataclass
class Timeline:
    entries: list
    lineage: list
    warnings: list = field(default_factory=list)

    def entry_order_key(self):
        return [(e.ts_ns, e.lane, e.kind) for e in self.entries]


@dataclass(frozen=True, slots=True)
class PlacementChange:
    file_id: str
    zones_before: tuple
    zones_after: tuple
    classes_before: tuple
    classes_after: tuple


def _files_of(ev):
    raw = ev.attrs.get("files", ev.attrs.get("file", ""))
    return tuple(f for f in (p.strip() for p in raw.split(",")) if f)


def diff_snapshots(a, b, geometry=None):
    """One change record per file whose zone set or hotness multiset moved."""
    pa = file_placements(a, geometry)
    pb = file_placements(b, geometry)
    changes = []
    for file_id in sorted(set(pa) & set(pb)):
        fa, fb = pa[file_id], pb[file_id]
        if fa.zones == fb.zones and fa.classes == fb.classes:
            continue
        changes.append(PlacementChange(
            file_id,
            tuple(sorted(fa.zones)), tuple(sorted(fb.zones)),
            fa.classes, fb.classes))
    return changes


def build_timeline(events, snapshots=None, geometry=None):
    """Ordered entries with compaction pairing (by attr cid), lineage records,
    delete links to the superseding compaction, and PLACEMENT entries from
    snapshot diffs.

    Pairing is strictly by correlation id: an unmatched begin or end is
    flagged dangling, never guessed.
    """
    drafts = []  # (ts, seq, lane, kind, files, zones, label, key)
    seq = 0
    for ev in events:
        files = _files_of(ev)
        zones = (ev.zone,) if ev.zone is not None else ()
        label_bits = [ev.op]
        if files:
            label_bits.append("files " + ",".join(files))
        if ev.attrs.get("level") is not None:
            label_bits.append("L" + ev.attrs["level"])
        if ev.zone is not None:
            label_bits.append(f"zone {ev.zone}")
        drafts.append({
            "ts": ev.ts_ns, "seq": seq, "lane": ev.layer, "kind": ev.op,
            "files": files, "zones": zones, "label": " ".join(label_bits),
            "event": ev,
        })
        seq += 1

    if snapshots is not None and len(snapshots) >= 2:
        for a, b in zip(snapshots, snapshots[1:]):
            for ch in diff_snapshots(a, b, geometry):
                label = (f"{ch.file_id}: zones {list(ch.zones_before)}->"
                         f"{list(ch.zones_after)}, classes "
                         f"{list(ch.classes_before)}->{list(ch.classes_after)}")
                drafts.append({
                    "ts": b.ts, "seq": seq, "lane": trace.LAYER_FS,
                    "kind": PLACEMENT, "files": (ch.file_id,),
                    "zones": ch.zones_after, "label": label, "event": None,
                })
                seq += 1

    drafts.sort(key=lambda d: (d["ts"], d["seq"]))  # stable for equal ts
    entries = [
        TimelineEntry(i, d["ts"], d["lane"], d["kind"], d["files"],
                      d["zones"], d["label"],
                      cid=(d["event"].attrs.get("cid")
                           if d["event"] is not None else None))
        for i, d in enumerate(drafts)
    ]

    warnings = []
    lineage = []
    open_compactions = {}  # cid -> entry index of begin
    completed = []  # (ts_end, inputs set, end index)
    links = {i: [] for i in range(len(entries))}
    dangling = set()
    trivial = set()

    for i, (d, entry) in enumerate(zip(drafts, entries)):
        ev = d["event"]
        if ev is None:
            continue
        if ev.op == trace.COMPACTION_BEGIN:
            cid = ev.attrs.get("cid")
            if cid is None:
                warnings.append(f"entry {i}: COMPACTION_BEGIN without cid")
                dangling.add(i)
                continue
            if cid in open_compactions:
                warnings.append(f"entry {i}: duplicate cid {cid}")
                dangling.add(i)
                continue
            open_compactions[cid] = i
        elif ev.op == trace.COMPACTION_END:
            cid = ev.attrs.get("cid")
            begin_idx = open_compactions.pop(cid, None)
            if begin_idx is None:
                warnings.append(f"entry {i}: COMPACTION_END with unknown cid {cid}")
                dangling.add(i)
                continue
            begin = entries[begin_idx]
            inputs = begin.files
            outputs = entry.files
            links[i].append((begin_idx, "pair"))
            if set(inputs) == set(outputs) \
                    or drafts[begin_idx]["event"].attrs.get("trivial") == "1":
                trivial.add(begin_idx)
                trivial.add(i)
            else:
                level_attr = drafts[begin_idx]["event"].attrs.get("level")
                for output in outputs:
                    lineage.append(CompactionLineage(
                        output, inputs,
                        int(level_attr) if level_attr is not None else None,
                        begin.ts_ns, entry.ts_ns, cid))
                completed.append((entry.ts_ns, set(inputs), i))
        elif ev.op == trace.FILE_DELETE:
            for file_id in entry.files:
                superseding = None
                for ts_end, inputs, end_idx in completed:
                    if ts_end <= entry.ts_ns and file_id in inputs:
                        superseding = end_idx
                if superseding is not None:
                    links[i].append((superseding, "superseded_by"))

    for cid, idx in open_compactions.items():
        warnings.append(f"entry {idx}: COMPACTION_BEGIN cid {cid} never ended")
        dangling.add(idx)

    final = []
    for entry in entries:
        entry_links = links[entry.index]
        final.append(replace(
            entry,
            links=tuple(l for l, _ in entry_links),
            link_kinds=tuple(k for _, k in entry_links),
            trivial=entry.index in trivial,
            dangling=entry.index in dangling,
        ))
    return Timeline(final, lineage, warnings)


def lineage_edges(timeline):
    """DAG edges as (inputs tuple, output) pairs."""
    return [(tuple(sorted(l.inputs)), l.output) for l in timeline.lineage]


def timeline_lines(timeline):
    return "".join(e.to_line() + "\n" for e in timeline.entries)


def timeline_text(timeline, filter_trivial=False):
    """Aligned-text rendering of the timeline."""
    rows = []
    for e in timeline.entries:
        if filter_trivial and e.trivial:
            continue
        flags = "".join(
            (["T"] if e.trivial else []) + (["!"] if e.dangling else []))
        rows.append((str(e.ts_ns), e.lane, e.kind, ",".join(e.files),
                     ",".join(str(z) for z in e.zones), flags, e.label))
    header = ("ts_ns", "lane", "kind", "files", "zones", "flags", "label")
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(len(header))]
    out = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for r in rows:
        out.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    return "\n".join(out) + "\n"
