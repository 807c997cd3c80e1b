/**
 * Kernel-side zone tracing: an embedded bpftrace program plus the
 * normalizer that turns its raw output into canonical trace records.
 *
 * The script is a fixed template; only the validated device name is
 * injected. Probe points are kernel-version-sensitive (nvme helpers are
 * not a stable ABI), so treat this as best-effort capture: the primary
 * analyzer never depends on it.
 */

import { decodeZsa, ZONE_MGMT_SEND_OPCODE } from './zsa.js';

const SECTOR = 512;

export function validateDeviceName(device: string): string {
  if (!/^[a-zA-Z0-9_-]+n?\d*$/.test(device)) {
    throw new Error(`suspicious device name: ${device}`);
  }
  return device;
}

/**
 * bpftrace program emitting raw lines:
 *   IO  <ts_ns> <rwbs> <sector> <bytes>     data requests (block layer)
 *   ZM  <ts_ns> <action> <sector>           typed zone management sends
 *   DRV <ts_ns> <opcode> <action> <sector>  passthrough (VM/vfio) commands
 *
 * The block probe filters on dev_t passed as positional parameter $1
 * (the CLI resolves it from /dev/<device>). The nvme probes cannot filter
 * by name cheaply and report all controllers; single-ZNS-device hosts are
 * the expected setup.
 */
export function getTraceScript(device: string): string {
  validateDeviceName(device); // referenced in the header for the operator
  return `
// zone tracing for /dev/${device}
tracepoint:block:block_rq_issue
/args->dev == (uint64)$1/
{
  printf("IO %lld %s %llu %u\\n",
         nsecs, args->rwbs, (uint64)args->sector,
         args->nr_sector * ${SECTOR});
}

kprobe:nvme_setup_zone_mgmt_send
{
  $req = (struct request *)arg1;
  printf("ZM %lld %d %llu\\n", nsecs, (int32)arg3, (uint64)$req->__sector);
}

// NVMe passthrough from a guest (vfio-pci): the block layer only sees
// REQ_OP_DRV_OUT, so decode the zone management command field instead.
kprobe:nvme_setup_cmd
{
  $cmd = (struct nvme_command *)arg1;
  $op = $cmd->common.opcode;
  if ($op == ${ZONE_MGMT_SEND_OPCODE}) {
    printf("DRV %lld %d %d %llu\\n", nsecs, $op,
           $cmd->zms.zsa, $cmd->zms.slba);
  }
}
`.trim() + '\n';
}

export interface NormalizeResult {
  records: string[]; // canonical JSONL lines
  skipped: number;   // raw lines that were not trace records
}

interface Record_ {
  ts_ns: number;
  layer: 'DEV';
  op: string;
  addr?: number;
  len?: number;
  attrs?: Record<string, string>;
}

function emit(rec: Record_): string {
  // alphabetical key order keeps output diffable, like the analyzer's own
  const ordered: Record<string, unknown> = {};
  if (rec.addr !== undefined) ordered.addr = rec.addr;
  if (rec.attrs !== undefined) ordered.attrs = rec.attrs;
  ordered.layer = rec.layer;
  if (rec.len !== undefined) ordered.len = rec.len;
  ordered.op = rec.op;
  ordered.ts_ns = rec.ts_ns;
  return JSON.stringify(ordered);
}

function dataOp(rwbs: string): string | null {
  // rwbs flag string from the block tracepoint: R=read, W=write; everything
  // else (flush, discard, metadata) is not a zone data op
  if (rwbs.includes('R')) return 'READ';
  if (rwbs.includes('W')) return 'WRITE';
  return null;
}

/** Turn raw bpftrace output into canonical trace lines. */
export function normalizeTraceOutput(raw: string): NormalizeResult {
  const records: string[] = [];
  let skipped = 0;
  for (const line of raw.split(/\r?\n/)) {
    const text = line.trim();
    if (!text) continue;
    const parts = text.split(/\s+/);
    if (parts[0] === 'IO' && parts.length === 5) {
      const [, ts, rwbs, sector, bytes] = parts;
      const op = dataOp(rwbs);
      const len = Number(bytes);
      if (op && len > 0) {
        records.push(emit({
          ts_ns: Number(ts), layer: 'DEV', op,
          addr: Number(sector) * SECTOR, len,
        }));
        continue;
      }
      skipped += 1;
      continue;
    }
    if (parts[0] === 'ZM' && parts.length === 4) {
      const [, ts, action, sector] = parts;
      const op = decodeZsa(Number(action));
      const addr = Number(sector) * SECTOR;
      if (op) {
        records.push(emit({ ts_ns: Number(ts), layer: 'DEV', op, addr }));
      } else {
        records.push(emit({
          ts_ns: Number(ts), layer: 'DEV', op: 'DRV_OUT', addr,
          attrs: { zsa: String(Number(action)) },
        }));
      }
      continue;
    }
    if (parts[0] === 'DRV' && parts.length === 5) {
      const [, ts, opcode, action, slba] = parts;
      if (Number(opcode) !== ZONE_MGMT_SEND_OPCODE) {
        skipped += 1;
        continue;
      }
      const op = decodeZsa(Number(action));
      const addr = Number(slba) * SECTOR;
      if (op) {
        records.push(emit({
          ts_ns: Number(ts), layer: 'DEV', op, addr,
          attrs: { via: 'DRV_OUT' },
        }));
      } else {
        records.push(emit({
          ts_ns: Number(ts), layer: 'DEV', op: 'DRV_OUT', addr,
          attrs: { zsa: String(Number(action)) },
        }));
      }
      continue;
    }
    skipped += 1; // bpftrace banners, attach notices, map dumps
  }
  return { records, skipped };
}
