/**
 * IndexedDB access layer.
 *
 * Schema: object store "vectors" (id -> Float32Array payload bytes),
 * "texts" (id -> string), "meta" (header fields). Every batch read is
 * exactly one transaction, delivered through a BridgeSignal.
 */

import { BridgeSignal } from "./signal.js";

export interface MetaRecord {
  key: string;
  value: unknown;
}

export class IndexedDbStore {
  /** Total database transactions issued (reads and writes). */
  transactionCount = 0;
  /** Signals handed out for batch reads, for contract assertions. */
  readonly signals: BridgeSignal[] = [];

  private constructor(private db: IDBDatabase) {}

  static open(name: string): Promise<IndexedDbStore> {
    return new Promise((resolve, reject) => {
      const request = indexedDB.open(name, 1);
      request.onupgradeneeded = () => {
        const db = request.result;
        db.createObjectStore("vectors");
        db.createObjectStore("texts");
        db.createObjectStore("meta");
      };
      request.onsuccess = () => resolve(new IndexedDbStore(request.result));
      request.onerror = () => reject(request.error);
    });
  }

  close(): void {
    this.db.close();
  }

  /** One transaction loading all requested payloads. */
  fetchBatch(ids: number[]): BridgeSignal {
    const signal = new BridgeSignal();
    this.signals.push(signal);
    this.transactionCount += 1;
    const tx = this.db.transaction("vectors", "readonly");
    const store = tx.objectStore("vectors");
    const payloads = new Map<number, Float32Array>();
    let missing: number | null = null;
    for (const id of ids) {
      const request = store.get(id);
      request.onsuccess = () => {
        if (request.result === undefined) {
          missing = missing ?? id;
        } else {
          payloads.set(id, new Float32Array(request.result as ArrayBuffer));
        }
      };
    }
    tx.oncomplete = () => {
      if (missing !== null) {
        signal.fail(`database missing id ${missing}`);
      } else {
        signal.complete(payloads);
      }
    };
    tx.onerror = () => signal.fail(String(tx.error));
    tx.onabort = () => signal.fail(String(tx.error ?? "transaction aborted"));
    return signal;
  }

  putChunk(
    vectors: Array<[number, Float32Array]>,
    texts: Array<[number, string]>,
  ): Promise<void> {
    return new Promise((resolve, reject) => {
      this.transactionCount += 1;
      const tx = this.db.transaction(["vectors", "texts"], "readwrite");
      const vectorStore = tx.objectStore("vectors");
      const textStore = tx.objectStore("texts");
      for (const [id, payload] of vectors) {
        vectorStore.put(
          payload.buffer.slice(
            payload.byteOffset,
            payload.byteOffset + payload.byteLength,
          ),
          id,
        );
      }
      for (const [id, text] of texts) {
        textStore.put(text, id);
      }
      tx.oncomplete = () => resolve();
      tx.onerror = () => reject(tx.error);
    });
  }

  getTexts(ids: number[]): Promise<Map<number, string>> {
    return new Promise((resolve, reject) => {
      this.transactionCount += 1;
      const tx = this.db.transaction("texts", "readonly");
      const store = tx.objectStore("texts");
      const out = new Map<number, string>();
      for (const id of ids) {
        const request = store.get(id);
        request.onsuccess = () => {
          if (request.result !== undefined) {
            out.set(id, request.result as string);
          }
        };
      }
      tx.oncomplete = () => resolve(out);
      tx.onerror = () => reject(tx.error);
    });
  }

  putMeta(key: string, value: unknown): Promise<void> {
    return new Promise((resolve, reject) => {
      this.transactionCount += 1;
      const tx = this.db.transaction("meta", "readwrite");
      tx.objectStore("meta").put(value, key);
      tx.oncomplete = () => resolve();
      tx.onerror = () => reject(tx.error);
    });
  }

  getMeta(key: string): Promise<unknown> {
    return new Promise((resolve, reject) => {
      this.transactionCount += 1;
      const tx = this.db.transaction("meta", "readonly");
      const request = tx.objectStore("meta").get(key);
      request.onsuccess = () => resolve(request.result);
      request.onerror = () => reject(request.error);
    });
  }

  countVectors(): Promise<number> {
    return new Promise((resolve, reject) => {
      this.transactionCount += 1;
      const tx = this.db.transaction("vectors", "readonly");
      const request = tx.objectStore("vectors").count();
      request.onsuccess = () => resolve(request.result);
      request.onerror = () => reject(request.error);
    });
  }
}
