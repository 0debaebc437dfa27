/** Binary min-heap over [primary, secondary] pairs, lexicographic order. */

export type Pair = [number, number];

function less(a: Pair, b: Pair): boolean {
  return a[0] !== b[0] ? a[0] < b[0] : a[1] < b[1];
}

export class PairHeap {
  private items: Pair[] = [];

  get size(): number {
    return this.items.length;
  }

  peek(): Pair {
    return this.items[0];
  }

  push(item: Pair): void {
    const items = this.items;
    items.push(item);
    let i = items.length - 1;
    while (i > 0) {
      const parent = (i - 1) >> 1;
      if (!less(items[i], items[parent])) {
        break;
      }
      [items[i], items[parent]] = [items[parent], items[i]];
      i = parent;
    }
  }

  pop(): Pair {
    const items = this.items;
    const top = items[0];
    const last = items.pop()!;
    if (items.length > 0) {
      items[0] = last;
      let i = 0;
      for (;;) {
        const left = 2 * i + 1;
        const right = left + 1;
        let smallest = i;
        if (left < items.length && less(items[left], items[smallest])) {
          smallest = left;
        }
        if (right < items.length && less(items[right], items[smallest])) {
          smallest = right;
        }
        if (smallest === i) {
          break;
        }
        [items[i], items[smallest]] = [items[smallest], items[i]];
        i = smallest;
      }
    }
    return top;
  }

  toArray(): Pair[] {
    return [...this.items];
  }
}
