// Wire protocol of the telemetry service: one JSON document per websocket
// text message. Parsing is defensive — a malformed message is reported as
// null and dropped by the caller, never thrown into the UI.

export interface ParamDesc {
  path: string;
  min: number;
  max: number;
  value: number;
}

export interface SchemaMsg {
  type: "schema";
  signals: string[];
  params: ParamDesc[];
  state: string;
  step_size: number;
  scenario?: string;
}

export interface FrameMsg {
  type: "frame";
  t: number;
  signals: Record<string, number>;
}

export interface AckMsg {
  type: "ack";
  seq: number;
  applied_step: number;
}

export interface ErrorMsg {
  type: "error";
  seq: number | null;
  message: string;
}

export interface ReportMsg {
  type: "report";
  total_steps: number;
  overrun_count: number;
  max_compute_time: number;
  mean_compute_time: number;
  error?: string;
}

export type ServerMsg = SchemaMsg | FrameMsg | AckMsg | ErrorMsg | ReportMsg;

function isFiniteNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

export function parseServerMessage(raw: string): ServerMsg | null {
  let msg: any;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  switch (msg.type) {
    case "schema":
      if (!Array.isArray(msg.signals) || !Array.isArray(msg.params)) return null;
      if (!msg.signals.every((s: unknown) => typeof s === "string")) return null;
      return msg as SchemaMsg;
    case "frame": {
      if (!isFiniteNumber(msg.t) || typeof msg.signals !== "object" ||
          msg.signals === null) return null;
      for (const v of Object.values(msg.signals)) {
        if (!isFiniteNumber(v)) return null;
      }
      return msg as FrameMsg;
    }
    case "ack":
      if (!isFiniteNumber(msg.applied_step)) return null;
      return msg as AckMsg;
    case "error":
      if (typeof msg.message !== "string") return null;
      return msg as ErrorMsg;
    case "report":
      if (!isFiniteNumber(msg.total_steps)) return null;
      return msg as ReportMsg;
    default:
      return null;
  }
}

export function setCommand(seq: number, path: string, value: number): string {
  return JSON.stringify({ type: "set", seq, path, value });
}

export function runControl(seq: number, kind: "start" | "pause" | "stop"): string {
  return JSON.stringify({ type: kind, seq });
}
