/**
 * Streamed JSONL ingestion into the browser database: chunked write
 * transactions, sequential ids, and queryability afterwards.
 */

import "fake-indexeddb/auto";
import { describe, expect, it } from "vitest";

import { Bridge } from "../src/index.js";
import {
  fixtureBytes,
  fixtureJson,
  fixtureLines,
  uniqueDbName,
  type ExpectedQuery,
} from "./helpers.js";

describe("ingest", () => {
  it("loads a JSONL corpus and serves queries from it", async () => {
    const bridge = await Bridge.init({
      snapshot: fixtureBytes("index.tidx"),
      dbName: uniqueDbName("ingest"),
      chunkSize: 128,
    });
    const before = bridge.db.transactionCount;
    const count = await bridge.ingest(fixtureLines("corpus.jsonl"));
    expect(count).toBe(1000);
    expect(await bridge.db.countVectors()).toBe(1000);
    // 1000 records at chunk size 128 -> ceil(1000/128) = 8 write txs,
    // plus the countVectors read inside ingest and the one just above.
    expect(bridge.db.transactionCount - before).toBe(10);

    // Ids are assigned in corpus order, matching the snapshot's graph.
    const queries = fixtureJson<number[][]>("queries.json");
    const expected = fixtureJson<ExpectedQuery[]>("expected.json");
    const hits = await bridge.query(queries[0], 10, 64, true);
    expect(hits.map((h) => h.id)).toEqual(expected[0].ids);
    expect(hits.map((h) => h.text)).toEqual(expected[0].texts);
    bridge.close();
  });

  it("skips blank lines and appends after existing content", async () => {
    const bridge = await Bridge.init({
      snapshot: fixtureBytes("index.tidx"),
      payloads: fixtureBytes("index.tidx.vec"),
      dbName: uniqueDbName("ingest"),
    });
    const embedding = new Array(32).fill(0.5);
    const lines = [
      "",
      JSON.stringify({ text: "appended", embedding }),
      "   ",
    ];
    expect(await bridge.ingest(lines)).toBe(1);
    expect(await bridge.db.countVectors()).toBe(1001);
    const texts = await bridge.db.getTexts([1000]);
    expect(texts.get(1000)).toBe("appended");
    bridge.close();
  });

  it.each([
    ["not json", /invalid JSON/],
    [JSON.stringify({ embedding: new Array(32).fill(0) }), /"text"/],
    [JSON.stringify({ text: "x", embedding: [1, 2] }), /dimension/],
    [JSON.stringify({ text: "x" }), /dimension/],
  ])("rejects malformed record %#", async (line, pattern) => {
    const bridge = await Bridge.init({
      snapshot: fixtureBytes("index.tidx"),
      dbName: uniqueDbName("ingest"),
    });
    await expect(bridge.ingest([line])).rejects.toThrow(pattern);
    bridge.close();
  });

  it("keeps a failing chunk out of the database entirely", async () => {
    const bridge = await Bridge.init({
      snapshot: fixtureBytes("index.tidx"),
      dbName: uniqueDbName("ingest"),
      chunkSize: 10,
    });
    const good = JSON.stringify({
      text: "ok",
      embedding: new Array(32).fill(0.1),
    });
    // 3 good records then a bad one: chunk never reaches size 10, so
    // nothing is flushed before the parse error aborts the stream.
    await expect(
      bridge.ingest([good, good, good, "broken"]),
    ).rejects.toThrow(/line 4/);
    expect(await bridge.db.countVectors()).toBe(0);
    bridge.close();
  });
});
