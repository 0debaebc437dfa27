/**
 * Lazy graph search over database-resident payloads.
 *
 * Mirrors the native engine: tier-1 cache inside the engine, tier-2 FIFO
 * cache in host memory, IndexedDB as the source of truth. Payload misses
 * are deferred and loaded in single batched transactions (flush when the
 * deferred list outgrows ef, or at end-of-layer), with all equal-distance
 * ties broken toward the smaller id.
 */

import { FifoCache } from "./cache.js";
import { PairHeap } from "./heap.js";
import type { IndexedDbStore } from "./idb.js";
import type { Metric, Snapshot } from "./snapshot.js";

export interface EngineStats {
  nDb: number;
  itemsFetched: number;
  hitsT1: number;
  hitsT2: number;
  flushRequests: number;
}

export function distance(
  q: Float32Array,
  v: Float32Array,
  metric: Metric,
): number {
  if (metric === "euclidean") {
    let acc = 0;
    for (let i = 0; i < q.length; i++) {
      const d = q[i] - v[i];
      acc += d * d;
    }
    return Math.sqrt(acc);
  }
  let dot = 0;
  let nq = 0;
  let nv = 0;
  for (let i = 0; i < q.length; i++) {
    dot += q[i] * v[i];
    nq += q[i] * q[i];
    nv += v[i] * v[i];
  }
  const norms = Math.sqrt(nq) * Math.sqrt(nv);
  if (norms === 0) {
    throw new Error("zero-norm vector under cosine metric");
  }
  return 1 - dot / norms;
}

/** Two bounded caches over the database; exclusive residency. */
export class TieredReader {
  readonly tier1: FifoCache;
  readonly tier2: FifoCache;
  stats: EngineStats = {
    nDb: 0,
    itemsFetched: 0,
    hitsT1: 0,
    hitsT2: 0,
    flushRequests: 0,
  };

  constructor(
    private source: IndexedDbStore,
    tier1Capacity: number,
    tier2Capacity: number,
  ) {
    this.tier1 = new FifoCache(tier1Capacity);
    this.tier2 = new FifoCache(tier2Capacity);
  }

  isResident(id: number): boolean {
    return this.tier1.has(id) || this.tier2.has(id);
  }

  private spill = (id: number, payload: Float32Array): void => {
    this.tier2.put(id, payload);
  };

  /** Tier 1 -> tier 2 (promote) -> one database transaction for misses. */
  async getBatch(ids: number[]): Promise<Map<number, Float32Array>> {
    const out = new Map<number, Float32Array>();
    const missing: number[] = [];
    for (const id of ids) {
      if (out.has(id) || missing.includes(id)) {
        continue;
      }
      const hit1 = this.tier1.get(id);
      if (hit1 !== undefined) {
        out.set(id, hit1);
        this.stats.hitsT1 += 1;
        continue;
      }
      const hit2 = this.tier2.get(id);
      if (hit2 !== undefined) {
        this.tier2.delete(id);
        this.tier1.put(id, hit2, this.spill);
        out.set(id, hit2);
        this.stats.hitsT2 += 1;
        continue;
      }
      missing.push(id);
    }
    if (missing.length > 0) {
      this.stats.flushRequests += 1;
      const signal = this.source.fetchBatch(missing);
      // Suspend on the settled promise: no spin loop, at most two checks.
      if (signal.check() === "pending") {
        await signal.settled;
      }
      if (signal.check() === "error") {
        throw new Error(signal.error ?? "batch fetch failed");
      }
      this.stats.nDb += 1;
      this.stats.itemsFetched += missing.length;
      for (const id of missing) {
        const payload = signal.payloads!.get(id)!;
        out.set(id, payload);
        this.tier1.put(id, payload, this.spill);
      }
    }
    return out;
  }

  resetStats(): void {
    this.stats = {
      nDb: 0,
      itemsFetched: 0,
      hitsT1: 0,
      hitsT2: 0,
      flushRequests: 0,
    };
  }
}

export class LazyEngine {
  constructor(
    readonly snapshot: Snapshot,
    readonly reader: TieredReader,
  ) {}

  private async searchLayer(
    q: Float32Array,
    entryPoints: number[],
    ef: number,
    level: number,
  ): Promise<Array<[number, number]>> {
    const adjacency = this.snapshot.layers[level];
    const metric = this.snapshot.metric;
    const reader = this.reader;
    const ep = [...new Set(entryPoints)].sort((a, b) => a - b);
    for (const e of ep) {
      if (!adjacency.has(e)) {
        throw new Error(`id ${e} does not exist at level ${level}`);
      }
      if (!reader.isResident(e)) {
        throw new Error(`entry point ${e} is not resident`);
      }
    }

    const payloads = await reader.getBatch(ep);
    const visited = new Set<number>(ep);
    const candidates = new PairHeap(); // [distance, id] min-heap
    const results = new PairHeap(); // [-distance, -id]: max at the top
    for (const e of ep) {
      const d = distance(q, payloads.get(e)!, metric);
      candidates.push([d, e]);
      results.push([-d, -e]);
    }
    while (results.size > ef) {
      results.pop();
    }

    const admit = (e: number, d: number): void => {
      if (results.size < ef || d < -results.peek()[0]) {
        candidates.push([d, e]);
        results.push([-d, -e]);
        if (results.size > ef) {
          results.pop();
        }
      }
    };

    let deferred: number[] = [];
    for (;;) {
      while (candidates.size > 0) {
        const [cDist, c] = candidates.pop();
        if (cDist > -results.peek()[0] && results.size >= ef) {
          break;
        }
        const fresh = adjacency.get(c)!.filter((e) => !visited.has(e));
        if (fresh.length > 0) {
          for (const e of fresh) {
            visited.add(e);
          }
          const resident = fresh.filter((e) => reader.isResident(e));
          for (const e of fresh) {
            if (!reader.isResident(e)) {
              deferred.push(e);
            }
          }
          if (resident.length > 0) {
            const loaded = await reader.getBatch(resident);
            for (const e of resident) {
              admit(e, distance(q, loaded.get(e)!, metric));
            }
          }
        }
        if (deferred.length > ef) {
          break; // intra-layer flush
        }
      }

      if (deferred.length > 0) {
        // One batched transaction loads everything deferred so far.
        const loaded = await reader.getBatch(deferred);
        const sorted = [...deferred].sort((a, b) => a - b);
        for (const e of sorted) {
          admit(e, distance(q, loaded.get(e)!, metric));
        }
        deferred = [];
      } else {
        break;
      }
    }

    const out = results
      .toArray()
      .map(([negD, negId]): [number, number] => [-negId, -negD]);
    out.sort((a, b) => (a[1] !== b[1] ? a[1] - b[1] : a[0] - b[0]));
    return out;
  }

  /** Greedy descent with ef=1 on upper levels, ef-wide at level 0. */
  async search(
    q: Float32Array,
    k: number,
    ef: number,
  ): Promise<Array<{ id: number; distance: number }>> {
    const snapshot = this.snapshot;
    if (snapshot.entryPoint === null) {
      return [];
    }
    if (q.length !== snapshot.dimension) {
      throw new Error(
        `query has dimension ${q.length}, index expects ${snapshot.dimension}`,
      );
    }
    let ep = [snapshot.entryPoint];
    for (let level = snapshot.maxLevel; level > 0; level--) {
      await this.reader.getBatch(ep); // make entry points resident
      const found = await this.searchLayer(q, ep, 1, level);
      ep = [found[0][0]];
    }
    await this.reader.getBatch(ep);
    const found = await this.searchLayer(q, ep, ef, 0);
    return found.slice(0, k).map(([id, d]) => ({ id, distance: d }));
  }
}
