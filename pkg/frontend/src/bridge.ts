/**
 * Public bridge: load a native snapshot into the browser database, run
 * lazy queries against it, and stream-ingest JSONL corpora.
 */

import { LazyEngine, TieredReader } from "./engine.js";
import { IndexedDbStore } from "./idb.js";
import {
  parsePayloadFile,
  parseSnapshot,
  parseTextFile,
  type Snapshot,
} from "./snapshot.js";

export interface BridgeOptions {
  snapshot: Uint8Array;
  /** Payload file bytes; loaded into the database when provided. */
  payloads?: Uint8Array;
  /** Text file bytes; loaded alongside the payloads. */
  texts?: Uint8Array;
  dbName?: string;
  tier1Capacity?: number;
  tier2Capacity?: number;
  /** Items per write transaction during loading/ingestion. */
  chunkSize?: number;
}

export interface QueryResult {
  id: number;
  distance: number;
  text?: string;
}

export class Bridge {
  private constructor(
    readonly snapshot: Snapshot,
    readonly db: IndexedDbStore,
    readonly reader: TieredReader,
    private engine: LazyEngine,
    private chunkSize: number,
  ) {}

  static async init(options: BridgeOptions): Promise<Bridge> {
    const snapshot = parseSnapshot(options.snapshot);
    const db = await IndexedDbStore.open(options.dbName ?? "tieredann");
    const chunkSize = options.chunkSize ?? 500;
    if (options.payloads) {
      const { dimension, entries } = parsePayloadFile(options.payloads);
      if (dimension !== snapshot.dimension) {
        throw new Error(
          `payload dimension ${dimension} does not match snapshot ` +
            `dimension ${snapshot.dimension}`,
        );
      }
      const texts = options.texts ? parseTextFile(options.texts) : [];
      const textById = new Map(texts);
      for (let lo = 0; lo < entries.length; lo += chunkSize) {
        const chunk = entries.slice(lo, lo + chunkSize);
        await db.putChunk(
          chunk,
          chunk
            .filter(([id]) => textById.has(id))
            .map(([id]): [number, string] => [id, textById.get(id)!]),
        );
      }
      await db.putMeta("header", {
        dimension: snapshot.dimension,
        metric: snapshot.metric,
        count: entries.length,
      });
    }
    const reader = new TieredReader(
      db,
      options.tier1Capacity ?? Number.MAX_SAFE_INTEGER,
      options.tier2Capacity ?? 0,
    );
    const engine = new LazyEngine(snapshot, reader);
    return new Bridge(snapshot, db, reader, engine, chunkSize);
  }

  async query(
    embedding: ArrayLike<number>,
    k: number,
    ef: number,
    withTexts = false,
  ): Promise<QueryResult[]> {
    if (k < 1 || ef < k) {
      throw new Error("need ef >= k >= 1");
    }
    const q = Float32Array.from(embedding as ArrayLike<number>);
    const hits = await this.engine.search(q, k, ef);
    if (!withTexts || hits.length === 0) {
      return hits;
    }
    const texts = await this.db.getTexts(hits.map((h) => h.id));
    return hits.map((h) => ({ ...h, text: texts.get(h.id) }));
  }

  /**
   * Chunked JSONL ingestion into the browser database. Each chunk is
   * parsed fully before its single write transaction; ids continue from
   * the current vector count.
   */
  async ingest(lines: Iterable<string> | AsyncIterable<string>): Promise<number> {
    let nextId = await this.db.countVectors();
    let ingested = 0;
    let chunk: Array<{ text: string; embedding: Float32Array }> = [];
    let lineNumber = 0;

    const flush = async (): Promise<void> => {
      const vectors = chunk.map((r, i): [number, Float32Array] => [
        nextId + i,
        r.embedding,
      ]);
      const texts = chunk.map((r, i): [number, string] => [
        nextId + i,
        r.text,
      ]);
      await this.db.putChunk(vectors, texts);
      nextId += chunk.length;
      ingested += chunk.length;
      chunk = [];
    };

    for await (const line of lines as AsyncIterable<string>) {
      lineNumber += 1;
      if (!line.trim()) {
        continue;
      }
      let record: { text?: unknown; embedding?: unknown };
      try {
        record = JSON.parse(line);
      } catch {
        throw new Error(`line ${lineNumber}: invalid JSON`);
      }
      if (typeof record.text !== "string") {
        throw new Error(`line ${lineNumber}: missing or non-string "text"`);
      }
      if (
        !Array.isArray(record.embedding) ||
        record.embedding.length !== this.snapshot.dimension
      ) {
        throw new Error(
          `line ${lineNumber}: embedding must have dimension ` +
            `${this.snapshot.dimension}`,
        );
      }
      chunk.push({
        text: record.text,
        embedding: Float32Array.from(record.embedding as number[]),
      });
      if (chunk.length >= this.chunkSize) {
        await flush();
      }
    }
    if (chunk.length > 0) {
      await flush();
    }
    return ingested;
  }

  close(): void {
    this.db.close();
  }
}
