/** NVMe Zone Send Action decoding for passthrough (REQ_OP_DRV_OUT) requests. */

export const ZONE_MGMT_SEND_OPCODE = 0x79;

const ZSA_OPS: Record<number, string> = {
  0x1: 'CLOSE',
  0x2: 'FINISH',
  0x3: 'OPEN',
  0x4: 'RESET',
  0x5: 'OFFLINE',
};

/**
 * Map a zone-send action code to a canonical op name, or null when the
 * code is unknown (callers keep those as opaque DRV_OUT records).
 */
export function decodeZsa(action: number): string | null {
  return ZSA_OPS[action] ?? null;
}
