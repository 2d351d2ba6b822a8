"""Execution engine: configuration, stepping phases, pacing and overrun
accounting, commands, determinism, CSV round trip."""

import threading
import time

import numpy as np
import pytest

from evchargesim.engine import (Command, CommandError, Engine, EngineError,
                                ScheduledCommand, SimConfig, read_csv,
                                write_csv)
from evchargesim.testbeds import build, level1


class ProbeModel:
    """Pure-python block model: a 'controller' computes u = f(step) and the
    'circuit' consumes it in the same step, recording both. A counter state
    verifies each step advances the model exactly once."""

    signal_names = ("u_controller", "u_consumed", "steps_taken")
    param_bounds = {"probe.gain": (0.0, 10.0)}

    def __init__(self, dt):
        self.dt = dt
        self.gain = 1.0
        self.steps = 0

    def get_param(self, path):
        return self.gain

    def set_param(self, path, value):
        self.gain = value

    def advance(self, step0, n, decim, out):
        k = 0
        for idx in range(n):
            g = step0 + idx
            u = self.gain * (g + 1)          # controller phase
            consumed = u                      # circuit consumes same-step value
            self.steps += 1
            if (g + 1) % decim == 0:
                out[k] = ((g + 1) * self.dt, u, consumed, self.steps)
                k += 1
        return k, -1, -1

    def fault_name(self, code):
        return "probe"


class FaultModel(ProbeModel):
    def advance(self, step0, n, decim, out):
        if step0 + n > 5:
            return 0, 7, 5
        return super().advance(step0, n, decim, out)

    def fault_name(self, code):
        return f"virtual_block_{code}"


class TestSimConfig:
    def test_total_steps_arithmetic(self):
        assert SimConfig(duration=1500.0, step_size=20e-6).total_steps == 75_000_000

    def test_invalid_configs_rejected(self):
        with pytest.raises(EngineError):
            SimConfig(duration=1.0, step_size=0.0)
        with pytest.raises(EngineError):
            SimConfig(duration=-1.0)
        with pytest.raises(EngineError):
            SimConfig(duration=1.0, decimation=0)
        with pytest.raises(EngineError):
            SimConfig(duration=1.0, pacing="warp")

    def test_step_counter_overflow_rejected(self):
        with pytest.raises(EngineError):
            SimConfig(duration=1e15, step_size=1e-7)


class TestRun:
    def test_zero_duration_empty_run(self):
        eng = Engine(ProbeModel(1e-3), SimConfig(duration=0.0, step_size=1e-3))
        rep = eng.run()
        assert rep.total_steps == 0
        assert rep.overrun_count == 0
        _, t, values = eng.frames()
        assert len(t) == 0

    def test_every_block_advanced_exactly_once_per_step(self):
        eng = Engine(ProbeModel(1e-3), SimConfig(duration=0.05, step_size=1e-3))
        eng.run()
        names, t, values = eng.frames()
        assert list(values[:, 2]) == list(range(1, 51))

    def test_same_step_controller_output_consumed(self):
        eng = Engine(ProbeModel(1e-3), SimConfig(duration=0.05, step_size=1e-3))
        eng.run()
        _, _, values = eng.frames()
        assert np.array_equal(values[:, 0], values[:, 1])

    def test_frame_times_monotone_and_decimated(self):
        cfg = SimConfig(duration=0.1, step_size=1e-3, decimation=7)
        eng = Engine(ProbeModel(1e-3), cfg)
        eng.run()
        _, t, _ = eng.frames()
        assert len(t) == 100 // 7
        assert np.all(np.diff(t) > 0)

    def test_accelerated_determinism_bit_identical(self):
        frames = []
        for _ in range(2):
            model = build(level1(), 20e-6)
            eng = Engine(model, SimConfig(duration=0.3, decimation=100),
                         scheduled=[ScheduledCommand(0.1, "level1.i_cc", 6.0)])
            eng.run()
            frames.append(eng.frames())
        assert np.array_equal(frames[0][1], frames[1][1])
        assert np.array_equal(frames[0][2], frames[1][2])

    def test_fault_aborts_with_block_and_step(self):
        eng = Engine(FaultModel(1e-3), SimConfig(duration=1.0, step_size=1e-3))
        with pytest.raises(EngineError, match=r"virtual_block_7.*step 5"):
            eng.run()

    def test_nonfinite_state_names_the_stage(self):
        from evchargesim import kernels
        model = build(level1(), 20e-6)
        model.state[kernels.S_V_DC] = float("nan")
        eng = Engine(model, SimConfig(duration=0.01))
        with pytest.raises(EngineError, match="pfc_boost"):
            eng.run()


class TestCommands:
    def test_unknown_path_rejected_without_effect(self):
        model = build(level1(), 20e-6)
        eng = Engine(model, SimConfig(duration=0.1))
        with pytest.raises(CommandError, match="foo.bar"):
            eng.apply_command("foo.bar", 1.0)

    def test_out_of_bounds_rejected(self):
        model = build(level1(), 20e-6)
        eng = Engine(model, SimConfig(duration=0.1))
        with pytest.raises(CommandError, match="bounds"):
            eng.apply_command("level1.i_cc", -5.0)

    def test_ack_carries_boundary_step(self):
        model = ProbeModel(1e-3)
        eng = Engine(model, SimConfig(duration=0.05, step_size=1e-3))
        eng.submit(Command(sequence=1, target="probe.gain", value=2.0))
        eng.run()
        acks = eng.acks()
        assert len(acks) == 1
        assert acks[0].sequence == 1
        assert acks[0].error is None
        assert 0 <= acks[0].applied_step <= 50

    def test_rejection_ack_for_bad_live_command(self):
        eng = Engine(ProbeModel(1e-3), SimConfig(duration=0.02, step_size=1e-3))
        eng.submit(Command(sequence=9, target="nope", value=1.0))
        eng.run()
        (ack,) = eng.acks()
        assert ack.sequence == 9
        assert ack.error is not None and "nope" in ack.error

    def test_latest_value_per_path_wins(self):
        model = ProbeModel(1e-3)
        eng = Engine(model, SimConfig(duration=0.02, step_size=1e-3))
        eng.submit(Command(sequence=1, target="probe.gain", value=3.0))
        eng.submit(Command(sequence=2, target="probe.gain", value=4.0))
        eng.run()
        assert model.gain == 4.0

    def test_scheduled_command_changes_following_frames(self):
        model = build(level1(), 20e-6)
        eng = Engine(model, SimConfig(duration=0.2, decimation=500),
                     scheduled=[ScheduledCommand(0.1, "level1.v_cv", 100.0)])
        eng.run()
        names, t, values = eng.frames()
        mode = values[:, model.signal_index("mode")]
        # dropping the CV preset below the battery voltage forces the latch
        assert mode[t < 0.1].max() == 0.0
        assert mode[-1] == 1.0

    def test_scheduled_command_outside_run_rejected(self):
        with pytest.raises(EngineError):
            Engine(ProbeModel(1e-3), SimConfig(duration=0.05, step_size=1e-3),
                   scheduled=[ScheduledCommand(1.0, "probe.gain", 1.0)])


class TestRealtime:
    def test_overrun_definition_and_idle(self):
        cfg = SimConfig(duration=0.05, step_size=1e-3, pacing="realtime")
        eng = Engine(ProbeModel(1e-3), cfg)
        rep_fast = eng.step()
        assert not rep_fast.overrun
        assert rep_fast.idle_time == pytest.approx(
            1e-3 - rep_fast.compute_time)

    def test_injected_delay_counts_exactly(self):
        # budget far above host-preemption stalls so only the injected
        # delays can overrun
        from evchargesim.engine import realtime_priority
        delayed_steps = {10, 11, 12, 13, 14}

        def hook(step):
            if step in delayed_steps:
                time.sleep(0.04)

        cfg = SimConfig(duration=1.0, step_size=20e-3, pacing="realtime")
        with realtime_priority():
            eng = Engine(ProbeModel(20e-3), cfg, step_hook=hook)
            rep = eng.run()
        assert rep.total_steps == 50
        assert rep.overrun_count == len(delayed_steps)

    def test_accelerated_never_reports_overrun(self):
        def hook(step):
            time.sleep(0.002)

        cfg = SimConfig(duration=0.01, step_size=1e-3)
        eng = Engine(ProbeModel(1e-3), cfg, step_hook=hook)
        rep = eng.run()
        assert rep.overrun_count == 0

    def test_pause_resume_stop(self):
        cfg = SimConfig(duration=10.0, step_size=1e-3, pacing="realtime")
        eng = Engine(ProbeModel(1e-3), cfg)
        eng.pause()
        worker = threading.Thread(target=eng.run)
        worker.start()
        time.sleep(0.1)
        taken_paused = eng.step_index
        eng.resume()
        time.sleep(0.2)
        eng.stop()
        worker.join(timeout=2.0)
        assert not worker.is_alive()
        assert taken_paused == 0
        assert 0 < eng.step_index < cfg.total_steps


class TestCsv:
    def test_round_trip_exact(self, tmp_path):
        model = build(level1(), 20e-6)
        eng = Engine(model, SimConfig(duration=0.05, decimation=100))
        eng.run()
        names, t, values = eng.frames()
        path = tmp_path / "frames.csv"
        write_csv(path, names, t, values)
        names2, t2, values2 = read_csv(path)
        assert names2 == names
        assert np.array_equal(t2, t)
        assert np.array_equal(values2, values)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "x.csv"
        write_csv(path, ("a", "b"), np.array([0.5]), np.array([[1.0, 2.0]]))
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,a,b"
        assert len(lines) == 2

    def test_empty_run_round_trip(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_csv(path, ("a",), np.empty(0), np.empty((0, 1)))
        names, t, values = read_csv(path)
        assert names == ("a",)
        assert len(t) == 0
