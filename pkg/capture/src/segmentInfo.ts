/**
 * Normalize /proc/fs/f2fs/<dev>/segment_info into the analyzer's
 * segment-info dump: `<index> <hotness> <valid_blocks>` per line.
 *
 * The procfs file prints `type|valid_blocks` cells, ten per row, after two
 * header lines; the cell position is the segment index. Layout drifts
 * between kernels, so this parser accepts any cell arrangement and only
 * trusts the cell order.
 */

const TYPE_NAMES = [
  'HOT_DATA', 'WARM_DATA', 'COLD_DATA',
  'HOT_NODE', 'WARM_NODE', 'COLD_NODE',
] as const;

export interface SegmentEntry {
  index: number;
  hotness: string;
  validBlocks: number;
}

export function parseSegmentInfo(content: string): SegmentEntry[] {
  const entries: SegmentEntry[] = [];
  let index = 0;
  for (const line of content.split(/\r?\n/)) {
    if (/format:|segment_type/.test(line)) continue; // header lines
    for (const cell of line.trim().split(/\s+/)) {
      const m = cell.match(/^(\d+)\|(\d+)$/);
      if (!m) continue;
      const type = Number(m[1]);
      if (type >= TYPE_NAMES.length) {
        throw new Error(`segment ${index}: unknown segment type ${type}`);
      }
      entries.push({
        index,
        hotness: TYPE_NAMES[type],
        validBlocks: Number(m[2]),
      });
      index += 1;
    }
  }
  return entries;
}

export function toSegmentDump(entries: SegmentEntry[]): string {
  return entries
    .map((e) => `${e.index} ${e.hotness} ${e.validBlocks}`)
    .join('\n') + (entries.length ? '\n' : '');
}
