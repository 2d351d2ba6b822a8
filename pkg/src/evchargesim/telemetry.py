"""Live steering/telemetry service.

Mirrors the operator-console split: the engine steps in a worker thread while
this service streams decimated signal frames to any number of clients over a
websocket and routes their steering commands back through the engine's
command queue. Frames cross the thread boundary through bounded per-client
queues with drop-oldest backpressure, so a slow client can never block the
stepping loop.

Wire messages (one JSON document per websocket text message):
  {"type":"schema","signals":[...],"params":[{"path","min","max","value"}],...}
  {"type":"frame","t":<s>,"signals":{name:value,...}}
  {"type":"set","seq":<n>,"path":<dotted>,"value":<number>}
  {"type":"ack","seq":<n>,"applied_step":<n>}
  {"type":"error","seq":<n>,"message":<text>}
  {"type":"start"|"pause"|"stop","seq":<n>}
  {"type":"report","total_steps":...,"overrun_count":...,...}
"""

from __future__ import annotations

import asyncio
import itertools
import json
import math
import os
import threading
import time
from collections import deque
from dataclasses import dataclass

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .engine import Command, Engine, EngineError, SimConfig

EMISSION_INTERVAL = 1e-3       # min wall time between emitted frames [s]
CLIENT_QUEUE_LIMIT = 512       # frames buffered per client before dropping

BIND_ENV_VAR = "EVCHARGESIM_BIND"


@dataclass
class _Client:
    queue: deque          # outgoing JSON strings, drop-oldest
    event: asyncio.Event  # wake-up for the sender task
    loop: asyncio.AbstractEventLoop


class SimulationSession:
    """Owns the engine worker thread and fans frames/acks out to clients."""

    def __init__(self, scenario, sim_config: SimConfig):
        self.scenario = scenario
        self.sim_config = sim_config
        self.model = scenario.build_model(sim_config.step_size).warm_up()
        self.engine = Engine(self.model, sim_config,
                             scheduled=list(scenario.commands),
                             frame_sink=self._on_frames)
        self.engine.pause()
        self._signal_names = list(self.model.signal_names)
        self._clients: dict[int, _Client] = {}
        self._client_ids = itertools.count(1)
        self._seq = itertools.count(1)
        self._pending: dict[int, tuple[int, int]] = {}  # seq -> (client, their seq)
        self._lock = threading.Lock()
        self._last_emit = 0.0
        self._latest_row = None
        self._frame_dirty = threading.Event()
        self._state = "paused"
        self._run_error: str | None = None
        self._thread: threading.Thread | None = None
        self.report = None

    # ------------------------------------------------------------ lifecycle

    def start_thread(self):
        if self._thread is None:
            self._thread = threading.Thread(target=self._run, daemon=True,
                                            name="evchargesim-engine")
            self._thread.start()
            self._emitter = threading.Thread(target=self._emit_loop,
                                             daemon=True,
                                             name="evchargesim-emitter")
            self._emitter.start()
        return self

    def _run(self):
        try:
            self.report = self.engine.run()
        except EngineError as err:
            self._run_error = str(err)
            self.report = self.engine.report()
        self._state = "finished"
        self._broadcast(self._report_message())

    def _emit_loop(self):
        """Serialize and fan out frames/acks outside the engine thread."""
        while True:
            finished = self._state == "finished"
            self._frame_dirty.wait(timeout=0.02)
            self._frame_dirty.clear()
            row = self._latest_row
            self._latest_row = None
            if row is not None and self._clients:
                signals = {name: float(row[1 + i])
                           for i, name in enumerate(self._signal_names)}
                self._broadcast(json.dumps({"type": "frame",
                                            "t": float(row[0]),
                                            "signals": signals}))
            self._drain_acks()
            if finished:
                return

    def close(self):
        self.engine.stop()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._emitter.join(timeout=5.0)

    # ------------------------------------------------------------ commands

    def control(self, kind: str, client_id: int, their_seq) -> None:
        if kind == "start":
            if self._state == "paused":
                self._state = "running"
                self.engine.resume()
            self._ack_now(client_id, their_seq)
        elif kind == "pause":
            if self._state == "running":
                self._state = "paused"
                self.engine.pause()
            self._ack_now(client_id, their_seq)
        elif kind == "stop":
            self.engine.stop()
            self._ack_now(client_id, their_seq)
        else:
            raise ValueError(f"unknown control '{kind}'")

    def submit_set(self, client_id: int, their_seq, path, value) -> None:
        seq = next(self._seq)
        with self._lock:
            self._pending[seq] = (client_id, their_seq)
        self.engine.submit(Command(sequence=seq, target=str(path),
                                   value=float(value)))
        self._drain_acks()

    def _ack_now(self, client_id, their_seq):
        msg = json.dumps({"type": "ack", "seq": their_seq,
                          "applied_step": self.engine.step_index})
        self._send_to(client_id, msg)

    def _drain_acks(self):
        for ack in self.engine.acks():
            with self._lock:
                client_id, their_seq = self._pending.pop(ack.sequence,
                                                         (None, None))
            if client_id is None:
                continue
            if ack.error is not None:
                msg = json.dumps({"type": "error", "seq": their_seq,
                                  "message": ack.error})
            else:
                msg = json.dumps({"type": "ack", "seq": their_seq,
                                  "applied_step": ack.applied_step})
            self._send_to(client_id, msg)

    # -------------------------------------------------------------- frames

    def _on_frames(self, rec):
        """Engine thread: O(1) hand-off. At most one row per emission
        interval is copied out; serialization happens in the emitter."""
        now = time.perf_counter()
        if now - self._last_emit < EMISSION_INTERVAL:
            return
        self._last_emit = now
        self._latest_row = rec[-1].copy()
        self._frame_dirty.set()

    def _broadcast(self, msg: str):
        with self._lock:
            clients = list(self._clients.values())
        for client in clients:
            client.queue.append(msg)
            client.loop.call_soon_threadsafe(client.event.set)

    def _send_to(self, client_id: int, msg: str):
        with self._lock:
            client = self._clients.get(client_id)
        if client is not None:
            client.queue.append(msg)
            client.loop.call_soon_threadsafe(client.event.set)

    # -------------------------------------------------------------- clients

    def attach(self, loop) -> tuple[int, _Client]:
        client = _Client(queue=deque(maxlen=CLIENT_QUEUE_LIMIT),
                         event=asyncio.Event(), loop=loop)
        with self._lock:
            cid = next(self._client_ids)
            self._clients[cid] = client
        return cid, client

    def detach(self, cid: int):
        with self._lock:
            self._clients.pop(cid, None)

    def schema_message(self) -> str:
        params = [{"path": path, "min": lo, "max": hi,
                   "value": self.model.get_param(path)}
                  for path, (lo, hi) in sorted(self.model.param_bounds.items())]
        return json.dumps({
            "type": "schema",
            "signals": self._signal_names,
            "params": params,
            "state": self._state,
            "step_size": self.sim_config.step_size,
            "scenario": self.scenario.name,
        })

    def _report_message(self) -> str:
        rep = self.report
        msg = {"type": "report",
               "total_steps": rep.total_steps if rep else 0,
               "overrun_count": rep.overrun_count if rep else 0,
               "max_compute_time": rep.max_compute_time if rep else 0.0,
               "mean_compute_time": rep.mean_compute_time if rep else 0.0}
        if self._run_error:
            msg["error"] = self._run_error
        return json.dumps(msg)


def _validate_set(msg):
    path = msg.get("path")
    value = msg.get("value")
    if not isinstance(path, str) or not path:
        raise ValueError("field 'path' must be a non-empty string")
    if not isinstance(value, (int, float)) or isinstance(value, bool) \
            or not math.isfinite(value):
        raise ValueError("field 'value' must be a finite number")
    return path, float(value)


def create_app(session: SimulationSession):
    """FastAPI app exposing /ws plus the static operator console."""
    app = FastAPI(title="evchargesim telemetry")
    app.state.session = session

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        loop = asyncio.get_running_loop()
        cid, client = session.attach(loop)
        await ws.send_text(session.schema_message())

        async def sender():
            while True:
                await client.event.wait()
                client.event.clear()
                while client.queue:
                    await ws.send_text(client.queue.popleft())

        send_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict):
                        raise ValueError("message must be a JSON object")
                except ValueError as err:
                    await ws.send_text(json.dumps(
                        {"type": "error", "seq": None,
                         "message": f"malformed message: {err}"}))
                    continue
                seq = msg.get("seq")
                kind = msg.get("type")
                try:
                    if kind == "set":
                        path, value = _validate_set(msg)
                        session.submit_set(cid, seq, path, value)
                    elif kind in ("start", "pause", "stop"):
                        session.control(kind, cid, seq)
                    else:
                        raise ValueError(f"unknown message type '{kind}'")
                except ValueError as err:
                    await ws.send_text(json.dumps(
                        {"type": "error", "seq": seq, "message": str(err)}))
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            session.detach(cid)

    pkg_root = os.path.dirname(os.path.dirname(
        os.path.dirname(os.path.abspath(__file__))))
    console_dir = os.path.join(pkg_root, "frontend", "dist")
    if os.path.isdir(console_dir):
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=console_dir, html=True),
                  name="console")
    return app


def serve(scenario, sim_config: SimConfig, host=None, port=8080) -> int:
    """Build the model, start the engine paused, serve until interrupted."""
    import uvicorn

    session = SimulationSession(scenario, sim_config).start_thread()
    app = create_app(session)
    bind = host or os.environ.get(BIND_ENV_VAR, "127.0.0.1")
    print(f"serving scenario '{scenario.name}' on ws://{bind}:{port}/ws "
          f"(engine paused; send {{\"type\":\"start\"}} to begin)")
    try:
        uvicorn.run(app, host=bind, port=port, log_level="warning")
    except SystemExit as err:  # uvicorn exits via SystemExit on bind errors
        return int(bool(err.code))
    finally:
        session.close()
    return 0
