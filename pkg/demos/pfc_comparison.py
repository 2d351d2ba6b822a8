"""Power-factor correction at work: the same Level-1 charger with the
dual-loop PFC against a fixed 0.73 duty ratio.

With the loop closed the source current is shaped onto the rectified-voltage
template (near-unity power factor); with a fixed duty it degenerates into a
distorted, phase-shifted waveform.

    python demos/pfc_comparison.py
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from evchargesim.design import power_factor
from evchargesim.engine import Engine, SimConfig
from evchargesim.testbeds import (PFC_COMPARISON_L_BOOST, Scenario, level1,
                                  step_test_scenario)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)
FS = 1.0 / 20e-6


def run(cfg, label):
    scenario = Scenario(name=label, config=cfg, duration=8.0)
    model = scenario.build_model().warm_up()
    engine = Engine(model, SimConfig(duration=8.0, decimation=1))
    engine.run()
    names, t, values = engine.frames()
    cols = {n: values[:, i] for i, n in enumerate(names)}
    window = t > t[-1] - 30 / 60.0
    pf, thd = power_factor(cols["v_src"][window], cols["i_src"][window],
                           60.0, FS)
    print(f"{label:18s} PF = {pf:.4f}   current THD = {thd*100:5.1f} %")
    return t, cols


t_on, on = run(level1(l_boost=PFC_COMPARISON_L_BOOST), "with PFC")
t_off, off = run(step_test_scenario("no_pfc_comparison").config, "fixed duty 0.73")

fig, axes = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
for ax, (t, cols, title) in zip(axes, ((t_on, on, "with PFC control"),
                                       (t_off, off, "fixed duty ratio"))):
    window = (t > 7.9) & (t <= 7.999)
    ax.plot((t[window] - 7.9) * 1e3, cols["v_src"][window] / 10.0,
            label="v_src / 10 [V]")
    ax.plot((t[window] - 7.9) * 1e3, cols["i_src"][window], label="i_src [A]")
    ax.set_title(title)
    ax.set_ylabel("waveforms")
    ax.grid(alpha=0.4)
    ax.legend(loc="upper right")
axes[1].set_xlabel("time [ms]")
fig.tight_layout()
fig.savefig(OUT / "pfc_comparison.png", dpi=110)
print(f"plot in {OUT}")
