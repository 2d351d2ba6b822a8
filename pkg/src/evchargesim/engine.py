"""Fixed-step discrete-time execution engine.

Each step runs the same three phases in order: read inputs and pending
commands, controller and circuit computation, output recording. The engine is
single-threaded; live commands cross into it through a thread-safe queue and
are drained only at step boundaries, so the model itself is never touched
concurrently.

Pacing modes:
  accelerated - run as fast as possible, stepping in chunks; overrun and idle
                time are not defined (reported false / zero).
  realtime    - align each step boundary to the wall clock. A step whose
                computation exceeds the step period is an overrun; it is
                reported, never skipped.
"""

from __future__ import annotations

import gc
import math
import queue
import threading
import time
from dataclasses import dataclass

import numpy as np

MAX_STEPS = 2 ** 62
PACING_ACCELERATED = "accelerated"
PACING_REALTIME = "realtime"

FAULT_NONE = -1


class EngineError(RuntimeError):
    """Fatal simulation error (non-finite state, bad configuration)."""


class CommandError(ValueError):
    """Rejected steering command (unknown path or out-of-bounds value)."""


@dataclass
class SimConfig:
    duration: float
    step_size: float = 20e-6
    pacing: str = PACING_ACCELERATED
    decimation: int = 1

    def __post_init__(self):
        if self.step_size <= 0:
            raise EngineError("step_size must be positive")
        if self.duration < 0:
            raise EngineError("duration must be nonnegative")
        if self.decimation < 1 or int(self.decimation) != self.decimation:
            raise EngineError("decimation must be a positive integer")
        if self.pacing not in (PACING_ACCELERATED, PACING_REALTIME):
            raise EngineError(f"unknown pacing '{self.pacing}'")
        if self.duration / self.step_size > MAX_STEPS:
            raise EngineError("duration/step_size overflows the step counter")

    @property
    def total_steps(self) -> int:
        return int(round(self.duration / self.step_size))


@dataclass
class StepReport:
    step_index: int
    compute_time: float
    idle_time: float
    overrun: bool


@dataclass
class RunReport:
    total_steps: int
    overrun_count: int
    max_compute_time: float
    mean_compute_time: float


@dataclass
class Command:
    sequence: int
    target: str
    value: float


@dataclass
class CommandAck:
    sequence: int
    applied_step: int | None = None
    error: str | None = None


@dataclass
class ScheduledCommand:
    time_s: float
    target: str
    value: float


class Engine:
    """Drives a model implementing the block-model protocol:

    signal_names : tuple of recorded signal names
    param_bounds : dict path -> (lo, hi)
    get_param / set_param
    advance(step0, n, decimation, out) -> (n_recorded, fault_code, fault_step)
    fault_name(code) -> offending block name
    """

    # steps between live-command / control checks in accelerated pacing
    CHUNK_STEPS = 4096

    def __init__(self, model, config: SimConfig,
                 scheduled: list[ScheduledCommand] | None = None,
                 frame_sink=None, step_hook=None):
        self.model = model
        self.config = config
        self.frame_sink = frame_sink
        self.step_hook = step_hook
        self._cmd_queue: queue.SimpleQueue = queue.SimpleQueue()
        self._acks: queue.SimpleQueue = queue.SimpleQueue()
        self._control = threading.Event()  # set -> running
        self._control.set()
        self._stop = False
        self.step_index = 0
        self._frames: list[np.ndarray] = []
        self._step_buf: np.ndarray | None = None
        self._overruns = 0
        self._max_compute = 0.0
        self._sum_compute = 0.0
        by_step: dict[int, list[ScheduledCommand]] = {}
        for cmd in scheduled or ():
            s = int(round(cmd.time_s / config.step_size))
            if not 0 <= s <= config.total_steps:
                raise EngineError(f"scheduled command at t={cmd.time_s} outside run")
            by_step.setdefault(s, []).append(cmd)
        self._scheduled = {s: cmds for s, cmds in sorted(by_step.items())}

    # ------------------------------------------------------------- control

    def submit(self, command: Command) -> None:
        """Queue a live command; it applies at the next step boundary."""
        self._cmd_queue.put(command)

    def acks(self) -> list[CommandAck]:
        out = []
        while True:
            try:
                out.append(self._acks.get_nowait())
            except queue.Empty:
                return out

    def pause(self):
        self._control.clear()

    def resume(self):
        self._control.set()

    def stop(self):
        self._stop = True
        self._control.set()

    def apply_command(self, target: str, value: float) -> int:
        """Validate and apply a parameter change between steps (direct call,
        single-threaded use). Returns the step index after which it applies."""
        self._check_command(target, value)
        self.model.set_param(target, value)
        return self.step_index

    def _check_command(self, target: str, value: float):
        bounds = self.model.param_bounds
        if target not in bounds:
            raise CommandError(f"unknown parameter path '{target}'")
        lo, hi = bounds[target]
        if not (math.isfinite(value) and lo <= value <= hi):
            raise CommandError(
                f"value {value} outside bounds [{lo}, {hi}] for '{target}'")

    def _drain_commands(self):
        if self._cmd_queue.empty():
            return
        latest: dict[str, Command] = {}
        rejected = []
        while True:
            try:
                cmd = self._cmd_queue.get_nowait()
            except queue.Empty:
                break
            try:
                self._check_command(cmd.target, cmd.value)
                latest[cmd.target] = cmd
            except CommandError as err:
                rejected.append((cmd, str(err)))
        for cmd, msg in rejected:
            self._acks.put(CommandAck(cmd.sequence, error=msg))
        for cmd in latest.values():
            self.model.set_param(cmd.target, cmd.value)
            self._acks.put(CommandAck(cmd.sequence, applied_step=self.step_index))

    def _apply_scheduled(self):
        cmds = self._scheduled.pop(self.step_index, None)
        if cmds:
            for cmd in cmds:
                self.apply_command(cmd.target, cmd.value)

    # ------------------------------------------------------------ stepping

    def _advance(self, n: int) -> int:
        """Advance ``n`` steps through the model, collecting frames."""
        decim = self.config.decimation
        start = self.step_index
        capacity = (start + n) // decim - start // decim
        width = 1 + len(self.model.signal_names)
        if n == 1:
            # fixed scratch row for step-at-a-time (realtime) use
            out = self._step_buf
            if out is None or out.shape[1] != width:
                out = self._step_buf = np.empty((1, width))
        else:
            out = np.empty((capacity, width))
        k, fault, fault_step = self.model.advance(start, n, decim, out)
        if fault != FAULT_NONE:
            raise EngineError(
                f"non-finite state in block '{self.model.fault_name(fault)}' "
                f"at step {fault_step}")
        if k:
            rec = out[:k]
            self._frames.append(rec.copy())
            if self.frame_sink is not None:
                self.frame_sink(rec)
        self.step_index = start + n
        return n

    def step(self) -> StepReport:
        """Advance exactly one step, with timing."""
        self._apply_scheduled()
        self._drain_commands()
        t0 = time.perf_counter()
        if self.step_hook is not None:
            self.step_hook(self.step_index)
        self._advance(1)
        compute = time.perf_counter() - t0
        realtime = self.config.pacing == PACING_REALTIME
        dt = self.config.step_size
        overrun = realtime and compute > dt
        idle = max(0.0, dt - compute) if realtime else 0.0
        self._overruns += int(overrun)
        self._max_compute = max(self._max_compute, compute)
        self._sum_compute += compute
        return StepReport(self.step_index - 1, compute, idle, overrun)

    def run(self) -> RunReport:
        """Run to the configured duration (honoring pause/stop controls)."""
        total = self.config.total_steps
        if self.config.pacing == PACING_REALTIME:
            self._run_realtime(total)
        else:
            self._run_accelerated(total)
        return self.report()

    def _run_accelerated(self, total: int):
        while self.step_index < total and not self._stop:
            while not self._control.wait(timeout=0.05):
                self._drain_commands()  # stay responsive while paused
            if self._stop:
                break
            self._apply_scheduled()
            self._drain_commands()
            boundary = self.step_index + self.CHUNK_STEPS
            for s in self._scheduled:
                if self.step_index < s < boundary:
                    boundary = s
                    break
            n = min(boundary, total) - self.step_index
            t0 = time.perf_counter()
            if self.step_hook is not None:
                for _ in range(n):
                    self.step_hook(self.step_index)
                    self._advance(1)
            else:
                self._advance(n)
            elapsed = time.perf_counter() - t0
            self._sum_compute += elapsed
            if n:
                self._max_compute = max(self._max_compute, elapsed / n)

    def _run_realtime(self, total: int):
        dt = self.config.step_size
        gc_was_enabled = gc.isenabled()
        gc.collect()
        gc.disable()  # no collector pauses inside the paced loop
        try:
            start = time.perf_counter()
            offset = self.step_index
            while self.step_index < total and not self._stop:
                if not self._control.is_set():
                    while not self._control.wait(timeout=0.05):
                        self._drain_commands()
                    start = time.perf_counter()  # re-anchor after pause
                    offset = self.step_index
                if self._stop:
                    break
                self.step()
                deadline = start + (self.step_index - offset) * dt
                remaining = deadline - time.perf_counter()
                if remaining > 2e-4:
                    time.sleep(remaining - 1e-4)
                while time.perf_counter() < deadline:
                    pass
        finally:
            if gc_was_enabled:
                gc.enable()

    def report(self) -> RunReport:
        n = self.step_index
        mean = self._sum_compute / n if n else 0.0
        return RunReport(n, self._overruns, self._max_compute, mean)

    # ------------------------------------------------------------- frames

    def frames(self):
        """(signal_names, t [s], values [n_frames x n_signals])."""
        names = tuple(self.model.signal_names)
        if not self._frames:
            return names, np.empty(0), np.empty((0, len(names)))
        data = np.vstack(self._frames)
        return names, data[:, 0], data[:, 1:]

    def write_csv(self, path):
        names, t, values = self.frames()
        write_csv(path, names, t, values)


class realtime_priority:
    """Best-effort elevation to a real-time scheduling class for paced runs;
    silently degrades (FIFO -> nice -> nothing) and restores on exit."""

    def __enter__(self):
        import os
        self._restore = None
        try:
            old_policy = os.sched_getscheduler(0)
            old_param = os.sched_getparam(0)
            os.sched_setscheduler(0, os.SCHED_FIFO, os.sched_param(50))
            self._restore = (old_policy, old_param)
        except (OSError, PermissionError, AttributeError):
            try:
                os.nice(-10)
            except (OSError, PermissionError):
                pass
        return self

    def __exit__(self, *exc):
        if self._restore is not None:
            import os
            policy, param = self._restore
            try:
                os.sched_setscheduler(0, policy, param)
            except (OSError, PermissionError):
                pass
        return False


def write_csv(path, names, t, values):
    """Round-trip-safe CSV: header ``t,<name>,...``, %.17g doubles."""
    header = ",".join(("t",) + tuple(names))
    data = np.column_stack([t, values]) if len(t) else np.empty((0, 1 + len(names)))
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def read_csv(path):
    """Load a frame CSV back as (names, t, values)."""
    with open(path) as fh:
        header = fh.readline().strip()
        body = fh.readline()
    cols = header.split(",")
    if not cols or cols[0] != "t":
        raise ValueError(f"not a frame CSV: header {header!r}")
    if not body.strip():
        data = np.empty((0, len(cols)))
    else:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return tuple(cols[1:]), data[:, 0], data[:, 1:]
