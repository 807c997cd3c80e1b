import { describe, expect, it } from 'vitest';

import { getTraceScript, normalizeTraceOutput, validateDeviceName } from '../src/bpftrace.js';

const RAW = `Attaching 3 probes...
IO 1000000 W 2048 8192
IO 2000000 R 0 4096
IO 2500000 FF 0 0
ZM 3000000 4 131072
ZM 3500000 2 131072
DRV 4000000 121 4 262144
DRV 4500000 121 238 262144
DRV 5000000 6 0 0
garbage line that bpftrace printed
`;

describe('normalizeTraceOutput', () => {
  const { records, skipped } = normalizeTraceOutput(RAW);
  const parsed = records.map((l) => JSON.parse(l));

  it('turns block IO lines into DEV data records (sectors -> bytes)', () => {
    expect(parsed[0]).toEqual({
      ts_ns: 1000000, layer: 'DEV', op: 'WRITE', addr: 2048 * 512, len: 8192,
    });
    expect(parsed[1]).toEqual({
      ts_ns: 2000000, layer: 'DEV', op: 'READ', addr: 0, len: 4096,
    });
  });

  it('decodes typed zone management sends', () => {
    expect(parsed[2]).toMatchObject({ op: 'RESET', addr: 131072 * 512 });
    expect(parsed[3]).toMatchObject({ op: 'FINISH', addr: 131072 * 512 });
  });

  it('decodes passthrough zone commands and marks their origin', () => {
    expect(parsed[4]).toMatchObject({
      op: 'RESET', addr: 262144 * 512, attrs: { via: 'DRV_OUT' },
    });
  });

  it('keeps unknown zone actions as opaque DRV_OUT records', () => {
    expect(parsed[5]).toMatchObject({ op: 'DRV_OUT', attrs: { zsa: '238' } });
  });

  it('skips banners, flush-only IO, and non-zone passthrough', () => {
    expect(records).toHaveLength(6);
    expect(skipped).toBe(4);
  });

  it('timestamps are non-decreasing in emitted order', () => {
    const ts = parsed.map((r) => r.ts_ns);
    expect([...ts].sort((a, b) => a - b)).toEqual(ts);
  });
});

describe('getTraceScript', () => {
  it('filters the block probe by dev_t parameter', () => {
    const script = getTraceScript('nvme0n1');
    expect(script).toContain('args->dev == (uint64)$1');
    expect(script).toContain('nvme_setup_zone_mgmt_send');
    expect(script).toContain('== 121'); // zone management send opcode 0x79
  });

  it('rejects shell-hostile device names', () => {
    expect(() => validateDeviceName('nvme0n1; rm -rf /')).toThrow();
    expect(validateDeviceName('nvme0n1')).toBe('nvme0n1');
  });
});
