"""Offline design and linear-analysis toolkit: converter sizing formulas,
DAB small-signal gains and closed-loop responses, PR controller frequency
response, and power-quality metrics (power factor, current THD).

All computations are stateless; frequency responses are sampled on log grids
and exportable as CSV for external plotting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass
class FrequencyResponse:
    """Sampled response: angular frequency [rad/s], magnitude [dB], phase [deg]."""
    w: np.ndarray
    mag_db: np.ndarray
    phase_deg: np.ndarray

    def __post_init__(self):
        if not np.all(np.diff(self.w) > 0):
            raise ValueError("frequency grid must be strictly increasing")
        if not (np.all(np.isfinite(self.mag_db)) and np.all(np.isfinite(self.phase_deg))):
            raise ValueError("non-finite response values")

    def peak(self):
        """(w, mag_db) at the magnitude maximum."""
        k = int(np.argmax(self.mag_db))
        return float(self.w[k]), float(self.mag_db[k])

    def band_above(self, threshold_db: float) -> float:
        """Width [rad/s] of the contiguous-grid span with |G| above threshold."""
        mask = self.mag_db >= threshold_db
        if not mask.any():
            return 0.0
        w = self.w[mask]
        return float(w[-1] - w[0])

    def to_csv(self, path):
        header = "w_rad_s,mag_db,phase_deg"
        data = np.column_stack([self.w, self.mag_db, self.phase_deg])
        np.savetxt(path, data, delimiter=",", header=header, comments="",
                   fmt="%.17g")


def log_grid(w_min=1.0, w_max=1e5, points_per_decade=200) -> np.ndarray:
    decades = math.log10(w_max / w_min)
    n = int(round(decades * points_per_decade)) + 1
    return np.logspace(math.log10(w_min), math.log10(w_max), n)


@dataclass
class DabOperatingPoint:
    """DAB fundamental-model operating point."""
    v_in: float
    v_out: float
    r_load: float
    l_r: float
    theta_deg: float
    w_sw: float = TWO_PI * 2000.0

    def __post_init__(self):
        if min(self.v_in, self.v_out, self.r_load, self.l_r, self.w_sw) <= 0:
            raise ValueError("operating point values must be positive")

    @property
    def theta_rad(self) -> float:
        return math.radians(self.theta_deg)


_FUND = 0.5 * (4.0 / math.pi) ** 2  # fundamental-component RMS product factor


def dab_power(op: DabOperatingPoint) -> float:
    """Fundamental-model transferred power [W]: both bridge voltages reduced
    to their fundamental RMS phasors."""
    return _FUND * op.v_in * op.v_out * math.sin(op.theta_rad) / (op.w_sw * op.l_r)


def dab_gain_k1(op: DabOperatingPoint) -> float:
    """Small-signal output-voltage gain dV_out/dtheta [V/rad]."""
    return _FUND * op.r_load * op.v_in * math.cos(op.theta_rad) / (op.w_sw * op.l_r)


def dab_gain_k2(op: DabOperatingPoint) -> float:
    """Small-signal output-current gain dI_out/dtheta [A/rad]."""
    return dab_gain_k1(op) / op.r_load


def dab_closed_loop(kp: float, ki: float, k2: float,
                    grid: np.ndarray | None = None,
                    t_end: float = 10.0, dt: float = 1e-3):
    """Closed current loop of the phase-shift-controlled DAB: static plant
    gain K2 under PI unity feedback.

        G_cl(s) = K2 (kp s + ki) / (s (1 + K2 kp) + K2 ki)

    Returns (FrequencyResponse, t, y) with the unit-step response simulated
    at ``dt`` resolution.
    """
    w = log_grid() if grid is None else np.asarray(grid, dtype=float)
    s = 1j * w
    g = k2 * (kp * s + ki) / (s * (1.0 + k2 * kp) + k2 * ki)
    resp = FrequencyResponse(w, 20.0 * np.log10(np.maximum(np.abs(g), 1e-300)),
                             np.degrees(np.angle(g)))
    n = int(round(t_end / dt))
    t = np.arange(n + 1) * dt
    y = np.empty(n + 1)
    integ = 0.0
    out = 0.0
    for k in range(n + 1):
        e = 1.0 - out
        u = kp * e + integ
        integ += ki * e * dt
        out = k2 * u
        y[k] = out
    return resp, t, y


def bandwidth_3db(resp: FrequencyResponse, ref_db: float | None = None) -> float:
    """First frequency where magnitude drops 3 dB below the reference level
    (the first-point magnitude unless given); inf if it never does."""
    ref = (resp.mag_db[0] if ref_db is None else ref_db) - 3.0103
    below = np.nonzero(resp.mag_db < ref)[0]
    if below.size == 0:
        return math.inf
    return float(resp.w[below[0]])


def pfc_cap_size(i_out: float, f: float, dv_ripple: float) -> float:
    """DC-bus capacitance [F] absorbing the double-frequency power ripple
    for a peak-to-peak voltage ripple target."""
    if i_out < 0 or f <= 0 or dv_ripple <= 0:
        raise ValueError("need i_out >= 0, f > 0, dv_ripple > 0")
    return i_out / (TWO_PI * f * dv_ripple)


def boost_inductor_size(v_in: float, v_out: float, f_sw: float, di_ripple: float):
    """Boost duty ratio and inductance [H] for a current-ripple target.

    Returns (duty, L). The input must be below the output (boost operation).
    """
    if v_in <= 0 or v_out <= 0 or f_sw <= 0 or di_ripple <= 0:
        raise ValueError("inputs must be positive")
    if v_in >= v_out:
        raise ValueError("boost requires v_in < v_out")
    duty = (v_out - v_in) / v_out
    l = (v_out - v_in) * duty / (f_sw * di_ripple)
    return duty, l


def pr_transfer(w: np.ndarray, kp: float, kr: float, wc: float, w0: float):
    s = 1j * np.asarray(w, dtype=float)
    return kp + kr * (2.0 * wc * s) / (s * s + 2.0 * wc * s + w0 * w0)


def pr_bode(kp: float, kr: float, wc: float, w0: float,
            grid: np.ndarray | None = None) -> FrequencyResponse:
    """Frequency response of the proportional-resonant controller."""
    if min(kp, kr, wc, w0) <= 0:
        raise ValueError("PR parameters must be positive")
    w = log_grid() if grid is None else np.asarray(grid, dtype=float)
    g = pr_transfer(w, kp, kr, wc, w0)
    return FrequencyResponse(w, 20.0 * np.log10(np.abs(g)),
                             np.degrees(np.angle(g)))


def power_factor(v_samples, i_samples, f_fund: float, fs: float):
    """Power factor and current THD from synchronously sampled waveforms.

    PF = P_avg / (V_rms I_rms) over an integer number of fundamental cycles;
    the current fundamental is extracted by correlation with sine/cosine at
    f_fund. Requires at least five cycles of samples.

    Returns (pf, thd_i).
    """
    v = np.asarray(v_samples, dtype=float)
    i = np.asarray(i_samples, dtype=float)
    if v.shape != i.shape or v.ndim != 1:
        raise ValueError("voltage/current sample arrays must match")
    samples_per_cycle = fs / f_fund
    n_cycles = int(v.size / samples_per_cycle)
    if n_cycles < 5:
        raise ValueError("need at least five fundamental cycles of samples")
    n = int(round(n_cycles * samples_per_cycle))
    v = v[-n:]
    i = i[-n:]
    t = np.arange(n) / fs
    p_avg = float(np.mean(v * i))
    v_rms = float(np.sqrt(np.mean(v * v)))
    i_rms = float(np.sqrt(np.mean(i * i)))
    if v_rms == 0.0 or i_rms == 0.0:
        raise ValueError("zero-RMS waveform")
    w = TWO_PI * f_fund
    a1 = 2.0 * float(np.mean(i * np.cos(w * t)))
    b1 = 2.0 * float(np.mean(i * np.sin(w * t)))
    i1_rms = math.hypot(a1, b1) / math.sqrt(2.0)
    i_dc = float(np.mean(i))
    harm = max(i_rms ** 2 - i1_rms ** 2 - i_dc ** 2, 0.0)
    thd = math.sqrt(harm) / i1_rms if i1_rms > 0 else math.inf
    return p_avg / (v_rms * i_rms), thd


def step_response_csv(path, t, y):
    np.savetxt(path, np.column_stack([t, y]), delimiter=",", header="t,y",
               comments="", fmt="%.17g")
