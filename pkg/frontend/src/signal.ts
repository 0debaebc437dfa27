/**
 * Completion signal for one in-flight database batch request.
 *
 * Transitions pending -> completed or pending -> error exactly once;
 * payloads are published before the state flip. `pollCount` counts
 * explicit state checks so tests can assert the engine suspends on the
 * promise instead of spinning.
 */

export type SignalState = "pending" | "completed" | "error";

export class BridgeSignal {
  payloads: Map<number, Float32Array> | null = null;
  error: string | null = null;
  pollCount = 0;

  private state: SignalState = "pending";
  private resolve!: () => void;
  readonly settled: Promise<void>;

  constructor() {
    this.settled = new Promise((resolve) => {
      this.resolve = resolve;
    });
  }

  check(): SignalState {
    this.pollCount += 1;
    return this.state;
  }

  complete(payloads: Map<number, Float32Array>): void {
    if (this.state !== "pending") {
      throw new Error("signal completed twice");
    }
    this.payloads = payloads;
    this.state = "completed";
    this.resolve();
  }

  fail(reason: string): void {
    if (this.state !== "pending") {
      throw new Error("signal completed twice");
    }
    this.error = reason;
    this.state = "error";
    this.resolve();
  }
}
