// Console session: owns the websocket, tracks every in-flight command until
// its ack or error arrives (no silent loss), and reconnects with exponential
// backoff after a drop. The socket constructor is injectable for tests.

import {
  AckMsg, ErrorMsg, FrameMsg, ReportMsg, SchemaMsg, parseServerMessage,
  runControl, setCommand,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientEvents {
  onSchema?: (msg: SchemaMsg) => void;
  onFrame?: (msg: FrameMsg) => void;
  onReport?: (msg: ReportMsg) => void;
  onServerError?: (msg: ErrorMsg) => void;
  onStatus?: (status: "connecting" | "connected" | "disconnected",
              retryInMs?: number) => void;
  onDropped?: (raw: string) => void;
}

interface Pending {
  resolve: (appliedStep: number) => void;
  reject: (err: Error) => void;
}

export const BACKOFF_INITIAL_MS = 500;
export const BACKOFF_MAX_MS = 8000;

export class ConsoleClient {
  private socket: SocketLike | null = null;
  private seq = 0;
  private pending = new Map<number, Pending>();
  private backoffMs = BACKOFF_INITIAL_MS;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;

  constructor(private url: string, private events: ClientEvents,
              private factory: SocketFactory =
                  (u) => new WebSocket(u) as unknown as SocketLike) {}

  connect(): void {
    this.closed = false;
    this.events.onStatus?.("connecting");
    const sock = this.factory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.backoffMs = BACKOFF_INITIAL_MS;
      this.events.onStatus?.("connected");
    };
    sock.onmessage = (ev) => this.handle(ev.data);
    sock.onclose = () => {
      this.socket = null;
      this.failPending("connection lost");
      if (this.closed) return;
      this.events.onStatus?.("disconnected", this.backoffMs);
      this.retryTimer = setTimeout(() => this.connect(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
    };
  }

  close(): void {
    this.closed = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.socket?.close();
    this.failPending("client closed");
  }

  get currentBackoffMs(): number {
    return this.backoffMs;
  }

  private failPending(reason: string): void {
    for (const [, p] of this.pending) p.reject(new Error(reason));
    this.pending.clear();
  }

  private handle(raw: string): void {
    const msg = parseServerMessage(raw);
    if (msg === null) {
      // malformed traffic is dropped with a diagnostic; the stream lives on
      console.warn("evchargesim console: dropped malformed message", raw);
      this.events.onDropped?.(raw);
      return;
    }
    switch (msg.type) {
      case "schema":
        this.events.onSchema?.(msg);
        break;
      case "frame":
        this.events.onFrame?.(msg);
        break;
      case "report":
        this.events.onReport?.(msg);
        break;
      case "ack": {
        const p = this.pending.get(msg.seq);
        if (p) {
          this.pending.delete(msg.seq);
          p.resolve((msg as AckMsg).applied_step);
        }
        break;
      }
      case "error": {
        const seq = (msg as ErrorMsg).seq;
        if (seq !== null && this.pending.has(seq)) {
          const p = this.pending.get(seq)!;
          this.pending.delete(seq);
          p.reject(new Error(msg.message));
        } else {
          this.events.onServerError?.(msg);
        }
        break;
      }
    }
  }

  private sendTracked(payload: (seq: number) => string): Promise<number> {
    if (!this.socket) return Promise.reject(new Error("not connected"));
    const seq = ++this.seq;
    const text = payload(seq);
    return new Promise<number>((resolve, reject) => {
      this.pending.set(seq, { resolve, reject });
      this.socket!.send(text);
    });
  }

  /** Returns the step index after which the new value applies. */
  setParameter(path: string, value: number): Promise<number> {
    return this.sendTracked((seq) => setCommand(seq, path, value));
  }

  control(kind: "start" | "pause" | "stop"): Promise<number> {
    return this.sendTracked((seq) => runControl(seq, kind));
  }

  pendingCount(): number {
    return this.pending.size;
  }
}
