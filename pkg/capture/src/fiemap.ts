/**
 * Extent capture: parse `filefrag -v` output (the portable FIEMAP query)
 * into the extent-dump format the analyzer ingests.
 */

export interface FilefragExtent {
  logical: number;   // bytes
  physical: number;  // bytes
  length: number;    // bytes
  flags: string[];
}

export interface FileExtents {
  fileId: string;
  fileSize: number;
  blockSize: number;
  extents: FilefragExtent[];
}

const FLAG_MAP: Record<string, string> = {
  last: 'LAST',
  unwritten: 'UNWRITTEN',
  merged: 'MERGED',
};

const SIZE_RE = /^File size of (.+) is (\d+) \((\d+) blocks? of (\d+) bytes\)/;
const ROW_RE = /^\s*\d+:\s*(\d+)\s*\.\.\s*\d+:\s*(\d+)\s*\.\.\s*\d+:\s*(\d+):(?:\s*(\d+):)?\s*([a-z_,]*)\s*$/;

export function parseFilefrag(output: string, fileId?: string): FileExtents {
  let id = fileId ?? '';
  let fileSize = 0;
  let blockSize = 0;
  const extents: FilefragExtent[] = [];
  for (const line of output.split(/\r?\n/)) {
    const size = line.match(SIZE_RE);
    if (size) {
      if (!fileId) id = size[1];
      fileSize = Number(size[2]);
      blockSize = Number(size[4]);
      continue;
    }
    const row = line.match(ROW_RE);
    if (row && blockSize > 0) {
      const flags = (row[5] ?? '')
        .split(',')
        .map((f) => FLAG_MAP[f.trim()])
        .filter((f): f is string => Boolean(f));
      extents.push({
        logical: Number(row[1]) * blockSize,
        physical: Number(row[2]) * blockSize,
        length: Number(row[3]) * blockSize,
        flags,
      });
    }
  }
  if (!blockSize) {
    throw new Error('not filefrag -v output (no "File size of ..." header)');
  }
  return { fileId: id, fileSize, blockSize, extents };
}

/** Render one file's extents as extent-dump text. */
export function toExtentDump(file: FileExtents): string {
  const lines = [`= ${file.fileId} ${file.fileSize}`];
  for (const e of file.extents) {
    const flags = e.flags.length ? e.flags.join(',') : '-';
    lines.push(`${file.fileId} ${e.logical} ${e.physical} ${e.length} ${flags}`);
  }
  return lines.join('\n') + '\n';
}
