// Operator console wiring: schema-driven channel list and control panel,
// rolling charts, run state, SOC/mode indicators and the overrun counter.

import { ConsoleClient } from "./client.js";
import { StripChart } from "./chart.js";
import { FrameMsg, ParamDesc, ReportMsg, SchemaMsg } from "./protocol.js";

const PREFERRED = ["i_batt", "v_batt", "v_dc", "q", "i_l", "p_chg",
                   "theta_shift"];

const charts = new Map<string, StripChart>();
let frameCount = 0;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function setStatus(text: string, cls: string): void {
  const badge = el<HTMLSpanElement>("status");
  badge.textContent = text;
  badge.className = `badge ${cls}`;
}

function buildCharts(signals: string[]): void {
  const host = el<HTMLDivElement>("charts");
  host.innerHTML = "";
  charts.clear();
  const chosen = PREFERRED.filter((s) => signals.includes(s)).slice(0, 6);
  for (const name of chosen) {
    const canvas = document.createElement("canvas");
    canvas.width = 560;
    canvas.height = 120;
    canvas.className = "chart";
    host.appendChild(canvas);
    charts.set(name, new StripChart(canvas, name));
  }
}

function buildControls(params: ParamDesc[], client: ConsoleClient): void {
  const panel = el<HTMLDivElement>("params");
  panel.innerHTML = "";
  for (const p of params) {
    const row = document.createElement("div");
    row.className = "param-row";
    const label = document.createElement("label");
    label.textContent = p.path;
    const input = document.createElement("input");
    input.type = "number";
    input.value = String(p.value);
    input.min = String(p.min);
    input.max = String(p.max);
    input.step = "any";
    const apply = document.createElement("button");
    apply.textContent = "apply";
    const note = document.createElement("span");
    note.className = "note";
    apply.onclick = () => {
      const value = Number(input.value);
      if (!Number.isFinite(value) || value < p.min || value > p.max) {
        note.textContent = `out of bounds [${p.min}, ${p.max}]`;
        input.value = String(p.value);
        return;
      }
      note.textContent = "pending...";
      client.setParameter(p.path, value).then((step) => {
        p.value = value;
        note.textContent = `applied at step ${step}`;
      }).catch((err) => {
        note.textContent = String(err.message ?? err);
        input.value = String(p.value);
      });
    };
    row.append(label, input, apply, note);
    panel.appendChild(row);
  }
}

function onFrame(msg: FrameMsg): void {
  frameCount++;
  for (const [name, chart] of charts) {
    const v = msg.signals[name];
    if (v !== undefined) chart.push(msg.t, v);
  }
  el<HTMLSpanElement>("sim-time").textContent = msg.t.toFixed(2);
  const soc = msg.signals["soc"];
  if (soc !== undefined) {
    el<HTMLSpanElement>("soc").textContent = `${soc.toFixed(2)} %`;
  }
  const mode = msg.signals["mode"];
  if (mode !== undefined) {
    el<HTMLSpanElement>("mode").textContent = mode > 0.5 ? "CV" : "CC";
  }
}

function onReport(msg: ReportMsg): void {
  el<HTMLSpanElement>("overruns").textContent = String(msg.overrun_count);
  setStatus(msg.error ? `run error: ${msg.error}` : "finished",
            msg.error ? "bad" : "idle");
}

function main(): void {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  const url = `${proto}://${location.host}/ws`;
  const client = new ConsoleClient(url, {
    onSchema: (msg: SchemaMsg) => {
      buildCharts(msg.signals);
      buildControls(msg.params, client);
      el<HTMLSpanElement>("scenario").textContent = msg.scenario ?? "-";
      setStatus(msg.state, msg.state === "running" ? "good" : "idle");
    },
    onFrame,
    onReport,
    onServerError: (msg) => setStatus(`server: ${msg.message}`, "bad"),
    onStatus: (status, retryMs) => {
      if (status === "disconnected") {
        setStatus(`disconnected, retrying in ${(retryMs ?? 0) / 1000}s`, "bad");
      } else if (status === "connecting") {
        setStatus("connecting", "idle");
      } else {
        setStatus("connected", "good");
      }
    },
  });
  client.connect();

  for (const kind of ["start", "pause", "stop"] as const) {
    el<HTMLButtonElement>(`btn-${kind}`).onclick = () => {
      client.control(kind)
        .then(() => setStatus(kind === "start" ? "running" : kind, "good"))
        .catch((err) => setStatus(String(err.message ?? err), "bad"));
    };
  }

  // rendering detached from the stream: drop points, never buffer unboundedly
  const render = () => {
    for (const chart of charts.values()) chart.draw();
    el<HTMLSpanElement>("frames").textContent = String(frameCount);
    requestAnimationFrame(render);
  };
  requestAnimationFrame(render);
}

main();
