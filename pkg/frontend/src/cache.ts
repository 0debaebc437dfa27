/** Item-count-bounded FIFO cache; hits do not refresh eviction order. */

export class FifoCache {
  private data = new Map<number, Float32Array>();

  constructor(public capacity: number) {
    if (capacity < 0) {
      throw new Error("capacity must be >= 0");
    }
  }

  get size(): number {
    return this.data.size;
  }

  has(id: number): boolean {
    return this.data.has(id);
  }

  get(id: number): Float32Array | undefined {
    return this.data.get(id);
  }

  delete(id: number): void {
    this.data.delete(id);
  }

  put(
    id: number,
    payload: Float32Array,
    onEvict?: (id: number, payload: Float32Array) => void,
  ): void {
    if (this.capacity === 0) {
      return;
    }
    if (this.data.has(id)) {
      this.data.set(id, payload);
      return;
    }
    while (this.data.size >= this.capacity) {
      const [oldId, oldPayload] = this.data.entries().next().value as [
        number,
        Float32Array,
      ];
      this.data.delete(oldId);
      onEvict?.(oldId, oldPayload);
    }
    this.data.set(id, payload);
  }

  keys(): number[] {
    return [...this.data.keys()];
  }

  clear(): void {
    this.data.clear();
  }
}
