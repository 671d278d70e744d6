/**
 * Wire protocol framing, mirroring the environment service bit-exactly:
 *
 *   [u32 LE payload_length] [u8 message_type] [payload ...]
 *
 * The payload is a single line of JSON terminated by LF followed by raw
 * binary blocks; the JSON's "blocks" object maps block names to
 * { offset, size } relative to the payload start.
 */

export const PROTOCOL_VERSION = "1.0";

export enum MsgType {
  HELLO = 1,
  CONFIG = 2,
  RESET = 3,
  OBS = 4,
  ACT = 5,
  EVAL_START = 6,
  EVAL_RESULT = 7,
  ERROR = 8,
  BYE = 9,
}

export interface Frame {
  type: MsgType;
  body: Record<string, unknown>;
  blocks: Map<string, Buffer>;
  /** raw frame bytes as received (length prefix + type + payload) */
  raw: Buffer;
}

export class ProtocolError extends Error {}

interface BlockEntry {
  offset: number;
  size: number;
}

export function encodePayload(
  body: Record<string, unknown>,
  blocks?: Map<string, Buffer>,
): Buffer {
  const doc: Record<string, unknown> = { ...body };
  let text: string;
  if (blocks && blocks.size > 0) {
    const names = [...blocks.keys()].sort();
    let table: Record<string, BlockEntry> = {};
    for (const n of names) table[n] = { offset: 0, size: blocks.get(n)!.length };
    // offsets depend on the JSON length; iterate to the fixpoint
    for (;;) {
      doc.blocks = table;
      text = JSON.stringify(doc);
      const base = Buffer.byteLength(text) + 1;
      let offset = base;
      const next: Record<string, BlockEntry> = {};
      for (const n of names) {
        next[n] = { offset, size: blocks.get(n)!.length };
        offset += blocks.get(n)!.length;
      }
      if (JSON.stringify(next) === JSON.stringify(table)) break;
      table = next;
    }
  } else {
    text = JSON.stringify(doc);
  }
  if (text.includes("\n")) {
    throw new ProtocolError("JSON text section must be a single line");
  }
  const parts: Buffer[] = [Buffer.from(text + "\n", "utf8")];
  if (blocks) for (const n of [...blocks.keys()].sort()) parts.push(blocks.get(n)!);
  return Buffer.concat(parts);
}

export function encodeFrame(
  type: MsgType,
  body: Record<string, unknown>,
  blocks?: Map<string, Buffer>,
): Buffer {
  const payload = encodePayload(body, blocks);
  const head = Buffer.alloc(5);
  head.writeUInt32LE(payload.length, 0);
  head.writeUInt8(type, 4);
  return Buffer.concat([head, payload]);
}

export function decodePayload(payload: Buffer): {
  body: Record<string, unknown>;
  blocks: Map<string, Buffer>;
} {
  const nl = payload.indexOf(0x0a);
  if (nl < 0) throw new ProtocolError("payload missing text-section terminator");
  let body: Record<string, unknown>;
  try {
    body = JSON.parse(payload.subarray(0, nl).toString("utf8"));
  } catch (e) {
    throw new ProtocolError(`bad JSON text section: ${e}`);
  }
  const blocks = new Map<string, Buffer>();
  const table = (body.blocks ?? {}) as Record<string, BlockEntry>;
  delete body.blocks;
  for (const [name, entry] of Object.entries(table)) {
    const { offset, size } = entry;
    if (offset < nl + 1 || offset + size > payload.length) {
      throw new ProtocolError(`block '${name}' out of payload bounds`);
    }
    blocks.set(name, payload.subarray(offset, offset + size));
  }
  return { body, blocks };
}

/** Incremental frame extraction from a byte stream. */
export class FrameBuffer {
  private buf: Buffer = Buffer.alloc(0);

  push(chunk: Buffer): void {
    this.buf = this.buf.length === 0 ? chunk : Buffer.concat([this.buf, chunk]);
  }

  next(): Frame | null {
    if (this.buf.length < 5) return null;
    const length = this.buf.readUInt32LE(0);
    if (this.buf.length < 5 + length) return null;
    const type = this.buf.readUInt8(4) as MsgType;
    if (!(type in MsgType)) throw new ProtocolError(`unknown message type ${type}`);
    const raw = this.buf.subarray(0, 5 + length);
    const payload = this.buf.subarray(5, 5 + length);
    this.buf = this.buf.subarray(5 + length);
    const { body, blocks } = decodePayload(payload);
    return { type, body, blocks, raw: Buffer.from(raw) };
  }
}
