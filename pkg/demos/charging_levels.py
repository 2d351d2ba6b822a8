"""Charge the 10 kWh pack for 25 minutes on all three charger levels and
compare the trajectories.

CC/CV charging from 10% SOC with the per-level presets (5 A / 262 V,
40 A / 273 V, 80 A / 279 V): battery waveforms, DAB phase shift, DC-bus
voltage and the SOC race between levels.

    python demos/charging_levels.py            # ~1 min, writes PNGs + CSVs
"""

import pathlib
import time

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from evchargesim.engine import Engine, SimConfig
from evchargesim.testbeds import default_scenario

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

runs = {}
for level in (1, 2, 3):
    scenario = default_scenario(level)
    model = scenario.build_model().warm_up()
    engine = Engine(model, SimConfig(duration=scenario.duration,
                                     decimation=1000))
    t0 = time.perf_counter()
    report = engine.run()
    wall = time.perf_counter() - t0
    names, t, values = engine.frames()
    cols = {n: values[:, i] for i, n in enumerate(names)}
    runs[level] = (t, cols)
    switch = t[np.argmax(cols["mode"] > 0.5)]
    print(f"Level {level}: {report.total_steps} steps in {wall:.1f} s wall, "
          f"end SOC {cols['soc'][-1]:.1f} %, CC->CV at t={switch:.0f} s, "
          f"mean CC power {np.mean(cols['p_chg'][cols['mode'] < 0.5])/1e3:.2f} kW")

fig, axes = plt.subplots(4, 3, figsize=(15, 11), sharex=True)
for j, level in enumerate((1, 2, 3)):
    t, cols = runs[level]
    minutes = t / 60.0
    axes[0, j].plot(minutes, cols["i_batt"], lw=0.8)
    axes[0, j].set_title(f"Level {level}")
    axes[0, j].set_ylabel("battery current [A]")
    axes[1, j].plot(minutes, cols["v_batt"], lw=0.8, color="tab:orange")
    axes[1, j].set_ylabel("battery voltage [V]")
    axes[2, j].plot(minutes, cols["theta_shift"], lw=0.8, color="tab:green")
    axes[2, j].set_ylabel("phase shift [deg]")
    axes[3, j].plot(minutes, cols["v_dc"], lw=0.8, color="tab:red")
    axes[3, j].set_ylabel("DC bus [V]")
    axes[3, j].set_xlabel("time [min]")
fig.tight_layout()
fig.savefig(OUT / "charging_waveforms.png", dpi=110)

plt.figure(figsize=(7, 4.5))
for level in (1, 2, 3):
    t, cols = runs[level]
    plt.plot(t / 60.0, cols["soc"], label=f"Level {level}")
plt.xlabel("time [min]")
plt.ylabel("SOC [%]")
plt.title("25-minute charge from 10% SOC")
plt.legend()
plt.grid(alpha=0.4)
plt.tight_layout()
plt.savefig(OUT / "soc_comparison.png", dpi=110)
print(f"plots in {OUT}")
