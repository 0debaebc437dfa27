/**
 * The in-browser engine must return exactly the same neighbour ids as
 * the native engine did on the same snapshot, payloads, and query
 * stream: a cold start with an unbounded tier-1 cache replays the same
 * deferral, flush, and admission sequence.
 */

import "fake-indexeddb/auto";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Bridge } from "../src/index.js";
import {
  fixtureBytes,
  fixtureJson,
  uniqueDbName,
  type ExpectedQuery,
} from "./helpers.js";

const K = 10;
const EF = 64;

describe("native equivalence", () => {
  let bridge: Bridge;
  const queries = fixtureJson<number[][]>("queries.json");
  const expected = fixtureJson<ExpectedQuery[]>("expected.json");

  beforeAll(async () => {
    bridge = await Bridge.init({
      snapshot: fixtureBytes("index.tidx"),
      payloads: fixtureBytes("index.tidx.vec"),
      texts: fixtureBytes("index.tidx.txt"),
      dbName: uniqueDbName("equivalence"),
    });
  });

  afterAll(() => bridge.close());

  it("matches the native (id, distance, text) lists on all 20 queries", async () => {
    expect(queries).toHaveLength(20);
    for (let i = 0; i < queries.length; i++) {
      const hits = await bridge.query(queries[i], K, EF, true);
      expect(hits.map((h) => h.id)).toEqual(expected[i].ids);
      for (let j = 0; j < K; j++) {
        expect(hits[j].distance).toBeCloseTo(expected[i].distances[j], 4);
        expect(hits[j].text).toBe(expected[i].texts[j]);
      }
    }
  });

  it("issues exactly one database transaction per flush request", () => {
    const stats = bridge.reader.stats;
    expect(stats.flushRequests).toBeGreaterThan(0);
    expect(bridge.db.signals).toHaveLength(stats.flushRequests);
    expect(stats.nDb).toBe(stats.flushRequests);
  });

  it("suspends on each batch signal instead of spinning", () => {
    for (const signal of bridge.db.signals) {
      expect(signal.pollCount).toBeLessThanOrEqual(2);
      expect(signal.payloads).not.toBeNull();
    }
  });

  it("evaluates every payload it fetched (zero fetch redundancy)", () => {
    const stats = bridge.reader.stats;
    // Unbounded tier 1, cold start: each id crosses the database once.
    expect(stats.itemsFetched).toBe(bridge.reader.tier1.size);
  });
});
