/**
 * Parsers for the native engine's on-disk formats.
 *
 * Index snapshot: magic "TIDX", u32 version, then length-prefixed blocks
 * each followed by a CRC-32 — metadata, node levels, one adjacency block
 * per level, and a payload-file reference string. Payload file: magic
 * "TANS" header then fixed-width (id u64, dim x f32) records. Text file:
 * magic "TTXT" header, UTF-8 blob, CRC-checked offset table.
 */

import { crc32 } from "./crc32.js";

export type Metric = "euclidean" | "cosine";

export interface Snapshot {
  dimension: number;
  m: number;
  efConstruction: number;
  metric: Metric;
  entryPoint: number | null;
  maxLevel: number;
  layers: Array<Map<number, number[]>>;
  nodeLevel: Map<number, number>;
  count: number;
  vectorRef: string;
}

export class SnapshotFormatError extends Error {}
export class SnapshotIntegrityError extends Error {}

class Reader {
  private view: DataView;
  private pos = 0;

  constructor(private bytes: Uint8Array) {
    this.view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  }

  u32(): number {
    const v = this.view.getUint32(this.pos, true);
    this.pos += 4;
    return v;
  }

  u64(): number {
    const v = this.view.getBigUint64(this.pos, true);
    this.pos += 8;
    return Number(v);
  }

  raw(n: number): Uint8Array {
    if (this.pos + n > this.bytes.length) {
      throw new SnapshotIntegrityError("truncated data");
    }
    const out = this.bytes.subarray(this.pos, this.pos + n);
    this.pos += n;
    return out;
  }

  /** Length-prefixed payload with trailing CRC-32. */
  block(): Uint8Array {
    if (this.pos + 8 > this.bytes.length) {
      throw new SnapshotIntegrityError("truncated block header");
    }
    const length = this.u64();
    if (this.pos + length + 4 > this.bytes.length) {
      throw new SnapshotIntegrityError("truncated block");
    }
    const payload = this.raw(length);
    const expected = this.u32();
    if (crc32(payload) !== expected) {
      throw new SnapshotIntegrityError("block checksum mismatch");
    }
    return payload;
  }
}

function asciiMagic(bytes: Uint8Array): string {
  return String.fromCharCode(...bytes);
}

export function parseSnapshot(bytes: Uint8Array): Snapshot {
  const r = new Reader(bytes);
  if (asciiMagic(r.raw(4)) !== "TIDX") {
    throw new SnapshotFormatError("bad snapshot magic");
  }
  const version = r.u32();
  if (version !== 1) {
    throw new SnapshotFormatError(`unsupported snapshot version ${version}`);
  }

  const meta = new Reader(r.block());
  const dimension = meta.u32();
  const m = meta.u32();
  const efConstruction = meta.u32();
  const metricCode = meta.raw(1)[0];
  const hasEntry = meta.raw(1)[0];
  meta.raw(2); // padding
  const entry = meta.u64();
  const levelCount = meta.u32();
  meta.u64(); // build seed, unused here
  const count = meta.u64();

  const nodeLevel = new Map<number, number>();
  const levels = new Reader(r.block());
  for (let i = 0; i < count; i++) {
    const id = levels.u64();
    nodeLevel.set(id, levels.u32());
  }

  const layers: Array<Map<number, number[]>> = [];
  for (let lc = 0; lc < levelCount; lc++) {
    const layer = new Map<number, number[]>();
    const block = new Reader(r.block());
    const nNodes = block.u64();
    for (let i = 0; i < nNodes; i++) {
      const id = block.u64();
      const degree = block.u32();
      const neighbors: number[] = new Array(degree);
      for (let j = 0; j < degree; j++) {
        neighbors[j] = block.u64();
      }
      layer.set(id, neighbors);
    }
    layers.push(layer);
  }

  const vectorRef = new TextDecoder().decode(r.block());
  return {
    dimension,
    m,
    efConstruction,
    metric: metricCode === 0 ? "euclidean" : "cosine",
    entryPoint: hasEntry ? entry : null,
    maxLevel: levelCount - 1,
    layers: layers.length ? layers : [new Map()],
    nodeLevel,
    count,
    vectorRef,
  };
}

export function parsePayloadFile(
  bytes: Uint8Array,
): { dimension: number; entries: Array<[number, Float32Array]> } {
  const r = new Reader(bytes);
  if (asciiMagic(r.raw(4)) !== "TANS") {
    throw new SnapshotFormatError("bad payload-file magic");
  }
  const version = r.u32();
  if (version !== 1) {
    throw new SnapshotFormatError(`unsupported payload version ${version}`);
  }
  const dimension = r.u32();
  const count = r.u64();
  const entries: Array<[number, Float32Array]> = [];
  for (let i = 0; i < count; i++) {
    const id = r.u64();
    const raw = r.raw(4 * dimension);
    // copy out of the shared buffer so IndexedDB can clone it freely
    const vec = new Float32Array(raw.slice().buffer);
    entries.push([id, vec]);
  }
  return { dimension, entries };
}

export function parseTextFile(bytes: Uint8Array): Array<[number, string]> {
  const r = new Reader(bytes);
  if (asciiMagic(r.raw(4)) !== "TTXT") {
    throw new SnapshotFormatError("bad text-file magic");
  }
  const version = r.u32();
  if (version !== 1) {
    throw new SnapshotFormatError(`unsupported text version ${version}`);
  }
  const count = r.u64();
  const tableOffset = r.u64();
  const entrySize = 20; // id u64, offset u64, length u32
  const table = bytes.subarray(tableOffset, tableOffset + count * entrySize);
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const storedCrc = view.getUint32(tableOffset + count * entrySize, true);
  if (crc32(table) !== storedCrc) {
    throw new SnapshotIntegrityError("text table checksum mismatch");
  }
  const decoder = new TextDecoder();
  const out: Array<[number, string]> = [];
  for (let i = 0; i < count; i++) {
    const base = tableOffset + i * entrySize;
    const id = Number(view.getBigUint64(base, true));
    const offset = Number(view.getBigUint64(base + 8, true));
    const length = view.getUint32(base + 16, true);
    out.push([id, decoder.decode(bytes.subarray(offset, offset + length))]);
  }
  return out;
}
