"""Lithium-ion traction pack model.

Generic charge/discharge curve of the Shepherd/Tremblay family: an open-circuit
voltage made of a constant term, a polarization term that collapses near full
discharge, and an exponential zone near full charge, plus current-dependent
polarization-resistance drops that differ between charge and discharge.

State of charge integrates the terminal current: soc = 100 * (1 - it/C) with
``it`` the net charge removed since full [Ah].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from numba import njit


class BatteryParameterError(ValueError):
    """Raised when curve anchor points are degenerate or mis-ordered."""


def extract_curve_params(v_full: float, v_exp: float, v_nom: float,
                         q_exp: float, q_nom: float, capacity: float):
    """Solve the four curve constants from the five anchor values.

    The exponential-zone amplitude spans full-to-exponential voltage, its decay
    makes the zone ~95% finished at q_exp, and the remaining two constants pin
    the zero-current curve to (0, v_full) and (q_nom, v_nom).

    Returns (e0 [V], a_amp [V], b_inv [1/Ah], k_pol [V, capacity-normalized]).
    """
    if not (0.0 < q_exp < q_nom < capacity):
        raise BatteryParameterError(
            f"need 0 < q_exp < q_nom < capacity, got {q_exp}, {q_nom}, {capacity}")
    if not (v_nom < v_exp < v_full):
        raise BatteryParameterError(
            f"need v_nom < v_exp < v_full, got {v_nom}, {v_exp}, {v_full}")
    a_amp = v_full - v_exp
    b_inv = 3.0 / q_exp
    e0 = v_full - a_amp
    # zero-current curve through (q_nom, v_nom):
    #   v_nom = e0 - k*C*q_nom/(C - q_nom) + a*exp(-b*q_nom)
    k_pol = (e0 - v_nom + a_amp * math.exp(-b_inv * q_nom)) \
        * (capacity - q_nom) / (capacity * q_nom)
    if not (a_amp > 0.0 and b_inv > 0.0 and k_pol > 0.0 and math.isfinite(k_pol)):
        raise BatteryParameterError("derived curve constants are not positive/finite")
    return e0, a_amp, b_inv, k_pol


@dataclass
class BatteryParams:
    """10 kWh / 40 Ah pack by default; anchor voltages per the pack datasheet."""
    capacity_ah: float = 40.0
    energy_kwh: float = 10.0
    v_full: float = 291.0
    v_exp: float = 270.0
    v_nom: float = 250.0
    q_exp_ah: float = 1.96
    q_nom_ah: float = 36.17
    r_int: float = 0.05          # internal ohmic resistance [ohm]
    e0: float = field(init=False)
    a_amp: float = field(init=False)
    b_inv: float = field(init=False)
    k_pol: float = field(init=False)

    def __post_init__(self):
        self.e0, self.a_amp, self.b_inv, self.k_pol = extract_curve_params(
            self.v_full, self.v_exp, self.v_nom,
            self.q_exp_ah, self.q_nom_ah, self.capacity_ah)


@njit(cache=True)
def open_circuit_voltage(it, e0, a_amp, b_inv, k_pol, capacity):
    """Zero-current curve value at charge deficit ``it`` [Ah]."""
    it = min(max(it, 0.0), 0.999 * capacity)
    return e0 - k_pol * capacity * it / (capacity - it) + a_amp * math.exp(-b_inv * it)


@njit(cache=True)
def terminal_voltage(it, i, e0, a_amp, b_inv, k_pol, capacity, r_int):
    """Terminal voltage at deficit ``it`` and current ``i`` (charging positive).

    Discharge adds the polarization resistance on the main term
    (K*C/(C-it) per amp); charge uses the K*C/(it+0.1C) form so the drop stays
    finite as the pack approaches full.
    """
    v0 = open_circuit_voltage(it, e0, a_amp, b_inv, k_pol, capacity)
    itc = min(max(it, 0.0), 0.999 * capacity)
    if i >= 0.0:  # charging
        r_pol = k_pol * capacity / (itc + 0.1 * capacity)
    else:
        r_pol = k_pol * capacity / (capacity - itc)
    return v0 + (r_pol + r_int) * i


@njit(cache=True)
def step_charge(it, i, dt_s, capacity):
    """One step of the charge integral: positive current lowers the deficit.

    Returns (it', soc [%], saturated flag).
    """
    it = it - i * dt_s / 3600.0
    saturated = False
    if it < 0.0:
        it = 0.0
        saturated = True
    elif it > capacity:
        it = capacity
        saturated = True
    soc = 100.0 * (1.0 - it / capacity)
    return it, soc, saturated


def soc_from_charge(it: float, capacity: float):
    """SOC [%] from deficit; out-of-range input clamps and flags."""
    flagged = not (0.0 <= it <= capacity)
    it = min(max(it, 0.0), capacity)
    return 100.0 * (1.0 - it / capacity), flagged


@dataclass
class BatteryState:
    it_ah: float = 0.0
    soc: float = 100.0
    v_terminal: float = 0.0
    i: float = 0.0
    saturated: bool = False


class Battery:
    """Convenience wrapper pairing params with a mutable state."""

    def __init__(self, params: BatteryParams | None = None, soc0: float = 100.0):
        self.params = params or BatteryParams()
        it0 = (1.0 - soc0 / 100.0) * self.params.capacity_ah
        self.state = BatteryState(it_ah=it0, soc=soc0)
        self.state.v_terminal = self.voltage(0.0)

    def voltage(self, i: float) -> float:
        p = self.params
        return terminal_voltage(self.state.it_ah, i, p.e0, p.a_amp, p.b_inv,
                                p.k_pol, p.capacity_ah, p.r_int)

    def step(self, i: float, dt_s: float) -> BatteryState:
        if not (math.isfinite(i) and math.isfinite(dt_s)):
            raise ValueError("non-finite battery step input")
        p = self.params
        it, soc, sat = step_charge(self.state.it_ah, i, dt_s, p.capacity_ah)
        self.state = BatteryState(it_ah=it, soc=soc, saturated=sat, i=i,
                                  v_terminal=terminal_voltage(
                                      it, i, p.e0, p.a_amp, p.b_inv,
                                      p.k_pol, p.capacity_ah, p.r_int))
        return self.state
