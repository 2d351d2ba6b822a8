// Rolling time-series store for one channel. Bounded capacity keeps memory
// flat no matter how long the stream runs; rendering decimates to at most
// two points per pixel with min/max pairs so spikes survive.

export interface Decimated {
  t: Float64Array;
  y: Float64Array;
}

export class RingBuffer {
  private t: Float64Array;
  private y: Float64Array;
  private head = 0;
  private count = 0;

  constructor(readonly capacity: number) {
    if (capacity < 2) throw new Error("capacity must be at least 2");
    this.t = new Float64Array(capacity);
    this.y = new Float64Array(capacity);
  }

  get length(): number {
    return this.count;
  }

  push(t: number, y: number): void {
    this.t[this.head] = t;
    this.y[this.head] = y;
    this.head = (this.head + 1) % this.capacity;
    if (this.count < this.capacity) this.count++;
  }

  latest(): { t: number; y: number } | null {
    if (this.count === 0) return null;
    const i = (this.head - 1 + this.capacity) % this.capacity;
    return { t: this.t[i], y: this.y[i] };
  }

  /** Chronologically ordered samples no older than (latest - window). */
  window(seconds: number): Decimated {
    const out_t: number[] = [];
    const out_y: number[] = [];
    const last = this.latest();
    if (!last) return { t: new Float64Array(0), y: new Float64Array(0) };
    const cutoff = last.t - seconds;
    const start = (this.head - this.count + this.capacity) % this.capacity;
    for (let k = 0; k < this.count; k++) {
      const i = (start + k) % this.capacity;
      if (this.t[i] >= cutoff) {
        out_t.push(this.t[i]);
        out_y.push(this.y[i]);
      }
    }
    return { t: Float64Array.from(out_t), y: Float64Array.from(out_y) };
  }

  /** Window decimated to <= 2 points per pixel (min/max per bucket). */
  decimated(seconds: number, pixels: number): Decimated {
    const w = this.window(seconds);
    const n = w.t.length;
    if (n <= 2 * pixels) return w;
    const t0 = w.t[0];
    const span = w.t[n - 1] - t0 || 1;
    const out_t: number[] = [];
    const out_y: number[] = [];
    let bucket = -1;
    let lo = 0, hi = 0, loT = 0, hiT = 0;
    const flush = () => {
      if (bucket < 0) return;
      if (loT <= hiT) {
        out_t.push(loT, hiT);
        out_y.push(lo, hi);
      } else {
        out_t.push(hiT, loT);
        out_y.push(hi, lo);
      }
    };
    for (let i = 0; i < n; i++) {
      const b = Math.min(pixels - 1,
                         Math.floor(((w.t[i] - t0) / span) * pixels));
      if (b !== bucket) {
        flush();
        bucket = b;
        lo = hi = w.y[i];
        loT = hiT = w.t[i];
      } else {
        if (w.y[i] < lo) { lo = w.y[i]; loT = w.t[i]; }
        if (w.y[i] > hi) { hi = w.y[i]; hiT = w.t[i]; }
      }
    }
    flush();
    return { t: Float64Array.from(out_t), y: Float64Array.from(out_y) };
  }
}
