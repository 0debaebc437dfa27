export { Bridge } from "./bridge.js";
export type { BridgeOptions, QueryResult } from "./bridge.js";
export { FifoCache } from "./cache.js";
export { LazyEngine, TieredReader, distance } from "./engine.js";
export { IndexedDbStore } from "./idb.js";
export { BridgeSignal } from "./signal.js";
export {
  SnapshotFormatError,
  SnapshotIntegrityError,
  parsePayloadFile,
  parseSnapshot,
  parseTextFile,
} from "./snapshot.js";
export type { Metric, Snapshot } from "./snapshot.js";
