"""Design-side look at the dual active bridge: transferred power versus
phase shift (switched simulation against the fundamental-component formula),
small-signal gains, and the closed current loop for several PI choices.

    python demos/dab_analysis.py
"""

import math
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from evchargesim.circuits import dab_average_power
from evchargesim.design import (DabOperatingPoint, dab_closed_loop,
                                dab_gain_k2, dab_power, pr_bode)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# power vs shift at the Level-1 operating values
thetas = np.arange(2.0, 89.0, 2.0)
switched = [dab_average_power(300.0, 262.0, th, 1e-3)[0] for th in thetas]
fundamental = [dab_power(DabOperatingPoint(300.0, 262.0, 65.0, 1e-3, th))
               for th in thetas]
plt.figure(figsize=(7, 4.5))
plt.plot(thetas, np.array(switched) / 1e3, label="switched, cycle-averaged")
plt.plot(thetas, np.array(fundamental) / 1e3, "--",
         label="fundamental component model")
plt.xlabel("phase shift [deg]")
plt.ylabel("transferred power [kW]")
plt.title("DAB power transfer, Level-1 values (300 V / 262 V / 1 mH)")
plt.grid(alpha=0.4)
plt.legend()
plt.tight_layout()
plt.savefig(OUT / "dab_power_vs_shift.png", dpi=110)

op = DabOperatingPoint(300.0, 262.0, 262.0 / 4.02, 1e-3, 12.0)
k2 = dab_gain_k2(op)
print(f"operating point 12 deg: P = {dab_power(op):.0f} W, "
      f"K2 = {k2:.2f} A/rad")

# closed current loop for a few PI values
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
for kp, ki in ((0.01, 0.1), (0.001, 0.1), (0.01, 0.01)):
    resp, t, y = dab_closed_loop(kp, ki, k2, t_end=8.0)
    ax1.semilogx(resp.w, resp.mag_db, label=f"kp={kp}, ki={ki}")
    ax2.plot(t, y, label=f"kp={kp}, ki={ki}")
ax1.set_xlabel("frequency [rad/s]")
ax1.set_ylabel("closed loop [dB]")
ax1.grid(alpha=0.4)
ax1.legend()
ax2.set_xlabel("time [s]")
ax2.set_ylabel("unit step response")
ax2.grid(alpha=0.4)
fig.tight_layout()
fig.savefig(OUT / "dab_current_loop.png", dpi=110)

# PR controller resonance
plt.figure(figsize=(7, 4.5))
for kr in (500.0, 1000.0, 2000.0):
    resp = pr_bode(200.0, kr, 200.0, 377.0)
    plt.semilogx(resp.w, resp.mag_db, label=f"kr = {kr:.0f}")
plt.axvline(377.0, color="k", lw=0.6, ls=":")
plt.xlim(10, 1e4)
plt.xlabel("frequency [rad/s]")
plt.ylabel("|G| [dB]")
plt.title("PR controller, kp=200, wc=200, resonance at 377 rad/s")
plt.grid(alpha=0.4)
plt.legend()
plt.tight_layout()
plt.savefig(OUT / "pr_bode.png", dpi=110)
print(f"plots in {OUT}")
