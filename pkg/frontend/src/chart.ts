// Minimal canvas strip chart: one channel, rolling window, autoscaled.

import { RingBuffer } from "./ringbuffer.js";

export class StripChart {
  private ctx: CanvasRenderingContext2D;
  readonly buffer: RingBuffer;

  constructor(private canvas: HTMLCanvasElement, private label: string,
              private windowSeconds = 12, capacity = 20000) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("no 2d context");
    this.ctx = ctx;
    this.buffer = new RingBuffer(capacity);
  }

  push(t: number, y: number): void {
    this.buffer.push(t, y);
  }

  draw(): void {
    const { width: w, height: h } = this.canvas;
    const ctx = this.ctx;
    ctx.fillStyle = "#101418";
    ctx.fillRect(0, 0, w, h);
    const data = this.buffer.decimated(this.windowSeconds, w);
    const n = data.t.length;
    ctx.fillStyle = "#8899bb";
    ctx.font = "11px sans-serif";
    if (n < 2) {
      ctx.fillText(`${this.label} (waiting)`, 8, 14);
      return;
    }
    let lo = Infinity, hi = -Infinity;
    for (let i = 0; i < n; i++) {
      if (data.y[i] < lo) lo = data.y[i];
      if (data.y[i] > hi) hi = data.y[i];
    }
    if (hi - lo < 1e-9) { hi += 0.5; lo -= 0.5; }
    const pad = 0.08 * (hi - lo);
    lo -= pad;
    hi += pad;
    const t0 = data.t[0];
    const span = data.t[n - 1] - t0 || 1;
    ctx.strokeStyle = "#36e0a0";
    ctx.lineWidth = 1.2;
    ctx.beginPath();
    for (let i = 0; i < n; i++) {
      const x = ((data.t[i] - t0) / span) * (w - 2) + 1;
      const y = h - ((data.y[i] - lo) / (hi - lo)) * (h - 18) - 2;
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.stroke();
    const last = this.buffer.latest()!;
    ctx.fillText(`${this.label} = ${last.y.toPrecision(5)}`, 8, 12);
    ctx.fillText(`${hi.toPrecision(4)}`, w - 60, 12);
    ctx.fillText(`${lo.toPrecision(4)}`, w - 60, h - 4);
  }
}
