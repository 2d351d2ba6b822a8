import { describe, expect, it } from "vitest";
import { parseServerMessage, runControl, setCommand } from "../src/protocol.js";

describe("parseServerMessage", () => {
  it("accepts a schema announcement", () => {
    const msg = parseServerMessage(JSON.stringify({
      type: "schema",
      signals: ["i_batt", "v_dc"],
      params: [{ path: "level3.q_ref", min: -1e5, max: 1e5, value: 3e4 }],
      state: "paused",
      step_size: 2e-5,
    }));
    expect(msg?.type).toBe("schema");
    if (msg?.type === "schema") {
      expect(msg.signals).toContain("v_dc");
      expect(msg.params[0].path).toBe("level3.q_ref");
    }
  });

  it("accepts frames with finite values only", () => {
    const ok = parseServerMessage(
      '{"type":"frame","t":1.5,"signals":{"v_dc":350.0}}');
    expect(ok?.type).toBe("frame");
    expect(parseServerMessage(
      '{"type":"frame","t":1.5,"signals":{"v_dc":"NaN"}}')).toBeNull();
    expect(parseServerMessage(
      '{"type":"frame","signals":{}}')).toBeNull();
  });

  it("rejects malformed payloads without throwing", () => {
    expect(parseServerMessage("{oops")).toBeNull();
    expect(parseServerMessage("42")).toBeNull();
    expect(parseServerMessage('{"type":"warp"}')).toBeNull();
    expect(parseServerMessage('{"type":"ack"}')).toBeNull();
  });

  it("accepts acks, errors and reports", () => {
    expect(parseServerMessage('{"type":"ack","seq":3,"applied_step":120}')
      ?.type).toBe("ack");
    expect(parseServerMessage('{"type":"error","seq":null,"message":"bad"}')
      ?.type).toBe("error");
    expect(parseServerMessage(JSON.stringify({
      type: "report", total_steps: 10, overrun_count: 0,
      max_compute_time: 1e-6, mean_compute_time: 1e-6,
    }))?.type).toBe("report");
  });
});

describe("outgoing messages", () => {
  it("serializes set commands with exact field names", () => {
    expect(JSON.parse(setCommand(7, "level3.vdc_ref", 400))).toEqual(
      { type: "set", seq: 7, path: "level3.vdc_ref", value: 400 });
  });

  it("serializes run controls", () => {
    expect(JSON.parse(runControl(1, "start"))).toEqual(
      { type: "start", seq: 1 });
  });
});
