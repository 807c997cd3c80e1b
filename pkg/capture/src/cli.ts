#!/usr/bin/env node
/**
 * zlens-capture: live-host shims producing the analyzer's input files.
 *
 *   zlens-capture trace --device nvme0n1 --out trace.jsonl [--duration 10]
 *   zlens-capture trace --from-file raw.txt --out trace.jsonl
 *   zlens-capture fiemap --out dump.txt FILE...
 *   zlens-capture fiemap --from-file filefrag.txt --file-id ID --out dump.txt
 *   zlens-capture segment-info --device nvme0n1 --out segments.txt
 *   zlens-capture segment-info --from-file segment_info.txt --out segments.txt
 *
 * Live capture needs root and the matching tools (bpftrace, filefrag);
 * --from-file normalizes previously captured raw output anywhere.
 */

import { spawnSync } from 'node:child_process';
import { readFileSync, statSync, writeFileSync } from 'node:fs';
import process from 'node:process';

import { getTraceScript, normalizeTraceOutput, validateDeviceName } from './bpftrace.js';
import { parseFilefrag, toExtentDump } from './fiemap.js';
import { parseSegmentInfo, toSegmentDump } from './segmentInfo.js';

interface Args {
  positional: string[];
  options: Map<string, string>;
}

function parseArgs(argv: string[]): Args {
  const positional: string[] = [];
  const options = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 1) {
    const arg = argv[i];
    if (arg.startsWith('--')) {
      const next = argv[i + 1];
      if (next === undefined || next.startsWith('--')) {
        options.set(arg.slice(2), 'true');
      } else {
        options.set(arg.slice(2), next);
        i += 1;
      }
    } else {
      positional.push(arg);
    }
  }
  return { positional, options };
}

function fail(message: string): never {
  process.stderr.write(`zlens-capture: ${message}\n`);
  process.exit(1);
}

function writeOut(options: Map<string, string>, text: string): void {
  const out = options.get('out');
  if (out && out !== '-') {
    writeFileSync(out, text);
    process.stderr.write(`wrote ${out}\n`);
  } else {
    process.stdout.write(text);
  }
}

function cmdTrace(args: Args): void {
  const fromFile = args.options.get('from-file');
  let raw: string;
  if (fromFile) {
    raw = readFileSync(fromFile, 'utf-8');
  } else {
    const device = args.options.get('device') ?? fail('trace needs --device or --from-file');
    validateDeviceName(device);
    let devt: number;
    try {
      const st = statSync(`/dev/${device}`);
      devt = st.rdev;
    } catch {
      fail(`no such device: /dev/${device}`);
    }
    const script = getTraceScript(device);
    const duration = Number(args.options.get('duration') ?? '10');
    const res = spawnSync(
      'bpftrace', ['-e', script, String(devt)],
      { encoding: 'utf-8', timeout: duration * 1000 + 5000, killSignal: 'SIGINT' });
    if (res.error) {
      fail(`bpftrace failed to start: ${res.error.message}`);
    }
    raw = res.stdout ?? '';
  }
  const { records, skipped } = normalizeTraceOutput(raw);
  writeOut(args.options, records.join('\n') + (records.length ? '\n' : ''));
  process.stderr.write(`${records.length} records, ${skipped} raw lines skipped\n`);
}

function cmdFiemap(args: Args): void {
  const fromFile = args.options.get('from-file');
  const chunks: string[] = [];
  if (fromFile) {
    const parsed = parseFilefrag(readFileSync(fromFile, 'utf-8'),
                                 args.options.get('file-id'));
    chunks.push(toExtentDump(parsed));
  } else {
    if (!args.positional.length) fail('fiemap needs FILE arguments or --from-file');
    for (const path of args.positional) {
      const res = spawnSync('filefrag', ['-v', '-b4096', path],
                            { encoding: 'utf-8' });
      if (res.error) fail(`filefrag failed to start: ${res.error.message}`);
      if (res.status !== 0) fail(`filefrag ${path}: ${res.stderr}`);
      chunks.push(toExtentDump(parseFilefrag(res.stdout, path)));
    }
  }
  writeOut(args.options, chunks.join(''));
}

function cmdSegmentInfo(args: Args): void {
  const fromFile = args.options.get('from-file');
  let raw: string;
  if (fromFile) {
    raw = readFileSync(fromFile, 'utf-8');
  } else {
    const device = args.options.get('device') ?? fail('segment-info needs --device or --from-file');
    validateDeviceName(device);
    try {
      raw = readFileSync(`/proc/fs/f2fs/${device}/segment_info`, 'utf-8');
    } catch (err) {
      fail(`cannot read segment_info for ${device}: ${(err as Error).message}`);
    }
  }
  writeOut(args.options, toSegmentDump(parseSegmentInfo(raw)));
}

const COMMANDS: Record<string, (args: Args) => void> = {
  trace: cmdTrace,
  fiemap: cmdFiemap,
  'segment-info': cmdSegmentInfo,
};

export function main(argv: string[]): void {
  const [command, ...rest] = argv;
  const handler = command ? COMMANDS[command] : undefined;
  if (!handler) {
    fail(`usage: zlens-capture <${Object.keys(COMMANDS).join('|')}> [options]`);
  }
  try {
    handler(parseArgs(rest));
  } catch (err) {
    fail((err as Error).message);
  }
}

main(process.argv.slice(2));
