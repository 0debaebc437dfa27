import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const fixturesDir = join(
  dirname(fileURLToPath(import.meta.url)),
  "..",
  "fixtures",
);

export function fixtureBytes(name: string): Uint8Array {
  return new Uint8Array(readFileSync(join(fixturesDir, name)));
}

export function fixtureJson<T>(name: string): T {
  return JSON.parse(readFileSync(join(fixturesDir, name), "utf-8")) as T;
}

export function fixtureLines(name: string): string[] {
  return readFileSync(join(fixturesDir, name), "utf-8").split("\n");
}

export interface ExpectedQuery {
  ids: number[];
  distances: number[];
  texts: string[];
}

let dbCounter = 0;

export function uniqueDbName(prefix: string): string {
  dbCounter += 1;
  return `${prefix}-${dbCounter}-${Date.now()}`;
}
