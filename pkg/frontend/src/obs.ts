/**
 * Observation unpacking: OBS frames carry named binary blocks whose
 * layout is declared in the CONFIG manifest. The unpacked structure is
 * dictionary-shaped (gym-style); flattening is a helper, not the default.
 */

import { Frame, ProtocolError } from "./protocol.js";

export interface RetinaImage {
  name: string;
  fovDeg: number;
  size: number;
  /** row-major RGB bytes, size*size*3 */
  pixels: Uint8Array;
}

export interface Observation {
  step: number;
  simAge: number;
  stage: string;
  episode: number;
  seq: number;
  audio: { token: number; amplitude: number };
  fixatedEntity: number | null;
  vision: RetinaImage[];
  /** one 0/1 entry per touch sensor */
  touch: Uint8Array;
  proprioception: Float32Array;
  vestibular: Float32Array;
  interoception: number;
  gazeDir: Float32Array;
}

export interface ObservationLayout {
  binary_size: number;
  blocks: Array<{
    name: string;
    offset: number;
    size: number;
    dtype: string;
    images?: string[];
    shape?: number[];
    fov_deg?: number[];
    bits?: number;
    bit_order?: string;
    count?: number;
  }>;
}

function f32(buf: Buffer): Float32Array {
  const out = new Float32Array(buf.length / 4);
  for (let i = 0; i < out.length; i++) out[i] = buf.readFloatLE(i * 4);
  return out;
}

export function unpackBits(buf: Buffer, nBits: number): Uint8Array {
  // MSB-first within each byte (numpy packbits convention)
  const out = new Uint8Array(nBits);
  for (let i = 0; i < nBits; i++) {
    out[i] = (buf[i >> 3] >> (7 - (i & 7))) & 1;
  }
  return out;
}

export function packBits(bits: Uint8Array): Buffer {
  const out = Buffer.alloc(Math.ceil(bits.length / 8));
  for (let i = 0; i < bits.length; i++) {
    if (bits[i]) out[i >> 3] |= 1 << (7 - (i & 7));
  }
  return out;
}

export function unpackObservation(
  frame: Frame,
  layout: ObservationLayout,
): Observation {
  const b = frame.body as Record<string, any>;
  const blocks = frame.blocks;
  const need = (name: string): Buffer => {
    const buf = blocks.get(name);
    if (buf === undefined) throw new ProtocolError(`OBS missing block '${name}'`);
    return buf;
  };
  const meta = new Map(layout.blocks.map((blk) => [blk.name, blk]));
  for (const blk of layout.blocks) {
    if (need(blk.name).length !== blk.size) {
      throw new ProtocolError(
        `block '${blk.name}' size ${need(blk.name).length} != manifest ${blk.size}`,
      );
    }
  }
  const vmeta = meta.get("vision")!;
  const size = vmeta.shape![0];
  const imgBytes = size * size * 3;
  const visionBuf = need("vision");
  const vision: RetinaImage[] = vmeta.images!.map((name, i) => ({
    name,
    fovDeg: vmeta.fov_deg![i],
    size,
    pixels: new Uint8Array(
      visionBuf.subarray(i * imgBytes, (i + 1) * imgBytes),
    ),
  }));
  const tmeta = meta.get("touch")!;
  return {
    step: b.step,
    simAge: b.sim_age,
    stage: b.stage,
    episode: b.episode,
    seq: b.seq,
    audio: b.audio,
    fixatedEntity: b.fixated_entity === -1 ? null : b.fixated_entity,
    vision,
    touch: unpackBits(need("touch"), tmeta.bits!),
    proprioception: f32(need("proprioception")),
    vestibular: f32(need("vestibular")),
    interoception: f32(need("interoception"))[0],
    gazeDir: f32(need("gaze_dir")),
  };
}

/** Re-pack unpacked fields; must equal the received block bytes. */
export function repackObservation(
  obs: Observation,
): Map<string, Buffer> {
  const out = new Map<string, Buffer>();
  out.set(
    "vision",
    Buffer.concat(obs.vision.map((img) => Buffer.from(img.pixels))),
  );
  out.set("touch", packBits(obs.touch));
  const floats = (arr: ArrayLike<number>): Buffer => {
    const buf = Buffer.alloc(arr.length * 4);
    for (let i = 0; i < arr.length; i++) buf.writeFloatLE(arr[i], i * 4);
    return buf;
  };
  out.set("proprioception", floats(obs.proprioception));
  out.set("vestibular", floats(obs.vestibular));
  out.set("interoception", floats([obs.interoception]));
  out.set("gaze_dir", floats(obs.gazeDir));
  return out;
}

/** Flatten the dictionary observation into one Float32Array (helper). */
export function flattenObservation(obs: Observation): Float32Array {
  const parts: number[] = [];
  for (const img of obs.vision) {
    for (const px of img.pixels) parts.push(px / 255);
  }
  for (const t of obs.touch) parts.push(t);
  for (const p of obs.proprioception) parts.push(p);
  for (const v of obs.vestibular) parts.push(v);
  parts.push(obs.interoception);
  parts.push(obs.audio.token, obs.audio.amplitude);
  for (const g of obs.gazeDir) parts.push(g);
  return Float32Array.from(parts);
}
