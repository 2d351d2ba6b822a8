"""Operator command line: batch charging runs, converter design numbers,
linear-analysis CSV exports, and the live telemetry/console server.

Per-level CSV column sets cover the charging waveform groups: battery
current/voltage/power, DAB phase shift, DC-bus voltage, PFC inductor current
(single-phase) or reactive power (three-phase), and SOC.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import design, testbeds
from .engine import (Engine, EngineError, PACING_ACCELERATED, PACING_REALTIME,
                     SimConfig, write_csv)

LEVEL_COLUMNS = {
    1: ("i_batt", "v_batt", "p_chg", "theta_shift", "v_dc", "i_l", "soc"),
    2: ("i_batt", "v_batt", "p_chg", "theta_shift", "v_dc", "i_l", "soc"),
    3: ("i_batt", "v_batt", "p_chg", "theta_shift", "v_dc", "q", "soc"),
}

MODE_NAMES = {0: "CC", 1: "CV"}


def _add_model_args(p):
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--level", type=int, choices=(1, 2, 3),
                       help="built-in testbed level")
    group.add_argument("--config", help="TOML testbed config file")


def _resolve_scenario(args):
    if args.scenario:
        if args.config:
            raise SystemExit("--scenario is incompatible with --config")
        expected = testbeds.SCENARIO_LEVELS.get(args.scenario)
        if expected is None:
            raise SystemExit(f"unknown scenario '{args.scenario}'")
        if args.level != expected:
            raise SystemExit(
                f"scenario '{args.scenario}' runs on level {expected}, "
                f"not level {args.level}")
        return testbeds.step_test_scenario(args.scenario)
    if args.config:
        cfg = testbeds.load_config(args.config)
        return testbeds.Scenario(name="config_run", config=cfg,
                                 duration=args.duration)
    return testbeds.default_scenario(args.level)


def cmd_run(args) -> int:
    scenario = _resolve_scenario(args)
    duration = args.duration if args.duration is not None else scenario.duration
    if scenario.commands and duration < scenario.duration:
        scenario.commands = [c for c in scenario.commands if c.time_s <= duration]
    sim = SimConfig(duration=duration, step_size=args.step,
                    pacing=PACING_REALTIME if args.realtime else PACING_ACCELERATED,
                    decimation=args.decimate)
    model = scenario.build_model(sim.step_size).warm_up()
    engine = Engine(model, sim, scheduled=scenario.commands)
    try:
        report = engine.run()
    except EngineError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    names, t, values = engine.frames()
    level = scenario.config.level
    cols = LEVEL_COLUMNS[level]
    idx = [names.index(c) for c in cols]
    write_csv(args.out, cols, t, values[:, idx])
    end_soc = values[-1, names.index("soc")] if len(t) else scenario.config.soc0
    end_mode = MODE_NAMES.get(int(values[-1, names.index("mode")]), "CC") \
        if len(t) else "CC"
    print(f"scenario: {scenario.name} (level {level})")
    print(f"steps: {report.total_steps}  overruns: {report.overrun_count}")
    print(f"wall time per step: mean {report.mean_compute_time * 1e6:.2f} us, "
          f"max {report.max_compute_time * 1e6:.2f} us")
    print(f"end SOC: {end_soc:.2f} %  end mode: {end_mode}")
    print(f"frames written: {len(t)} -> {args.out}")
    return 0


def cmd_design(args) -> int:
    if args.design_cmd == "pfc-cap":
        c = design.pfc_cap_size(args.iout, args.freq, args.ripple)
        print(f"inputs: I_out={args.iout} A, f={args.freq} Hz, "
              f"ripple={args.ripple} V peak-to-peak")
        print("formula: C = I_out / (2*pi*f*dV)")
        print(f"C = {c:.6g} F ({c * 1e3:.3f} mF)")
    else:
        try:
            duty, l = design.boost_inductor_size(args.vin, args.vout,
                                                 args.fsw, args.di)
        except ValueError as err:
            print(f"error: {err}", file=sys.stderr)
            return 1
        print(f"inputs: V_in={args.vin} V, V_out={args.vout} V, "
              f"f_sw={args.fsw} Hz, dI={args.di} A")
        print("formula: D = (V_out - V_in)/V_out; L = (V_out - V_in)*D/(f_sw*dI)")
        print(f"D = {duty:.4g}")
        print(f"L = {l:.6g} H ({l * 1e3:.3f} mH)")
    return 0


def cmd_analyze(args) -> int:
    if args.analyze_cmd == "pr-bode":
        resp = design.pr_bode(args.kp, args.kr, args.wc, args.w0)
        resp.to_csv(args.out)
        w_pk, mag_pk = resp.peak()
        print(f"PR response written to {args.out}; "
              f"peak {mag_pk:.2f} dB at {w_pk:.2f} rad/s")
        return 0
    cfg = testbeds.default_config(args.level)
    op = design.DabOperatingPoint(
        v_in=cfg.v_dc_ref, v_out=cfg.v_cv,
        r_load=cfg.v_cv / max(cfg.i_cc, 1e-9), l_r=cfg.l_r,
        theta_deg=cfg.theta_init_deg, w_sw=2.0 * math.pi * cfg.f_pwm)
    k2 = design.dab_gain_k2(op)
    resp, t, y = design.dab_closed_loop(args.kp, args.ki, k2)
    if args.analyze_cmd == "dab-bode":
        resp.to_csv(args.out)
        print(f"plant gain K2 = {k2:.3f} A/rad; response written to {args.out}")
    else:
        design.step_response_csv(args.out, t, y)
        print(f"plant gain K2 = {k2:.3f} A/rad; step response written to {args.out}")
    return 0


def cmd_serve(args) -> int:
    from . import telemetry
    if args.config:
        cfg = testbeds.load_config(args.config)
        scenario = testbeds.Scenario(name="serve", config=cfg,
                                     duration=args.duration)
    else:
        scenario = testbeds.default_scenario(args.level)
        scenario.duration = args.duration
    sim = SimConfig(duration=args.duration, step_size=args.step,
                    pacing=PACING_REALTIME if args.realtime else PACING_ACCELERATED,
                    decimation=args.decimate)
    return telemetry.serve(scenario, sim, host=None, port=args.port)


def build_parser():
    p = argparse.ArgumentParser(
        prog="evchargesim",
        description="Switching-level simulation of Level 1/2/3 EV charging")
    sub = p.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run a charging scenario, write CSV")
    _add_model_args(run)
    run.add_argument("--scenario", help="named step-test scenario")
    run.add_argument("--duration", type=float, default=None,
                     help="simulated seconds (default: scenario duration)")
    run.add_argument("--step", type=float, default=20e-6,
                     help="step size [s] (default 20e-6)")
    run.add_argument("--decimate", type=int, default=1000,
                     help="record every Nth step")
    run.add_argument("--realtime", action="store_true",
                     help="pace steps against the wall clock")
    run.add_argument("--out", default="run.csv", help="output CSV path")
    run.set_defaults(func=cmd_run)

    des = sub.add_parser("design", help="converter sizing calculations")
    dsub = des.add_subparsers(dest="design_cmd", required=True)
    cap = dsub.add_parser("pfc-cap", help="DC-bus capacitor from ripple spec")
    cap.add_argument("--iout", type=float, required=True, help="output current [A]")
    cap.add_argument("--ripple", type=float, required=True,
                     help="peak-to-peak voltage ripple [V]")
    cap.add_argument("--freq", type=float, default=60.0, help="source frequency [Hz]")
    boost = dsub.add_parser("boost-l", help="boost inductor from current ripple")
    boost.add_argument("--vin", type=float, required=True)
    boost.add_argument("--vout", type=float, required=True)
    boost.add_argument("--fsw", type=float, default=2000.0)
    boost.add_argument("--di", type=float, default=1.0)
    des.set_defaults(func=cmd_design)

    ana = sub.add_parser("analyze", help="linear analysis CSV exports")
    asub = ana.add_subparsers(dest="analyze_cmd", required=True)
    for nm, hlp in (("dab-bode", "DAB closed current loop Bode"),
                    ("dab-step", "DAB closed current loop step response")):
        a = asub.add_parser(nm, help=hlp)
        a.add_argument("--level", type=int, choices=(1, 2, 3), default=1)
        a.add_argument("--kp", type=float, default=0.01)
        a.add_argument("--ki", type=float, default=0.1)
        a.add_argument("--out", default=f"{nm.replace('-', '_')}.csv")
    pr = asub.add_parser("pr-bode", help="PR controller Bode")
    pr.add_argument("--kp", type=float, default=200.0)
    pr.add_argument("--kr", type=float, default=1000.0)
    pr.add_argument("--wc", type=float, default=200.0)
    pr.add_argument("--w0", type=float, default=377.0)
    pr.add_argument("--out", default="pr_bode.csv")
    ana.set_defaults(func=cmd_analyze)

    srv = sub.add_parser("serve", help="serve live telemetry and the console")
    _add_model_args(srv)
    srv.add_argument("--port", type=int, default=8080)
    srv.add_argument("--duration", type=float, default=1500.0)
    srv.add_argument("--step", type=float, default=20e-6)
    srv.add_argument("--decimate", type=int, default=1000)
    srv.add_argument("--realtime", action="store_true")
    srv.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
