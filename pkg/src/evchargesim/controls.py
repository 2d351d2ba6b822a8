"""Control blocks: discrete PI and PR, SRF-PLL, abc/dq transforms, PWM
carrier comparison, DAB phase-shift modulation, PFC dual-loop control and the
CC/CV charge supervisor.

Everything here is a pure state-transition function (numba-compiled scalars in,
scalars out) so the same code runs inside the hot simulation kernels and in
unit tests. Thin stateful wrappers are provided for interactive use.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
MODE_CC = 0
MODE_CV = 1


# ---------------------------------------------------------------- PI / PR

@njit(cache=True)
def pi_step(integ, e, kp, ki, dt, lo, hi):
    """Clamped PI with conditional (freeze) anti-windup.

    Output uses the integrator value accumulated so far; the integrator is
    frozen when the output is saturated and the error pushes further into the
    limit. Returns (u, integ').
    """
    u_raw = kp * e + integ
    if not ((u_raw >= hi and e > 0.0) or (u_raw <= lo and e < 0.0)):
        integ = integ + ki * e * dt
    u = min(max(u_raw, lo), hi)
    return u, integ


@njit(cache=True)
def pr_step(x1, x2, e, kp, kr, wc, w0, dt):
    """Proportional-resonant step, forward-difference integrators.

    Resonant part realizes 2*wc*s / (s^2 + 2*wc*s + w0^2) with two coupled
    integrators; output is kp*e + kr*x1. Returns (u, x1', x2').
    """
    u = kp * e + kr * x1
    x1n = x1 + dt * (2.0 * wc * (e - x1) - x2)
    x2n = x2 + dt * w0 * w0 * x1
    return u, x1n, x2n


# ------------------------------------------------------------- transforms

@njit(cache=True)
def abc_to_dq(a, b, c, theta):
    """Amplitude-invariant rotating-frame transform (d axis at ``theta``)."""
    s, co = math.sin(theta), math.cos(theta)
    s1 = math.sin(theta - TWO_PI / 3.0)
    c1 = math.cos(theta - TWO_PI / 3.0)
    s2 = math.sin(theta + TWO_PI / 3.0)
    c2 = math.cos(theta + TWO_PI / 3.0)
    d = (2.0 / 3.0) * (a * co + b * c1 + c * c2)
    q = -(2.0 / 3.0) * (a * s + b * s1 + c * s2)
    return d, q


@njit(cache=True)
def dq_to_abc(d, q, theta):
    s, co = math.sin(theta), math.cos(theta)
    s1 = math.sin(theta - TWO_PI / 3.0)
    c1 = math.cos(theta - TWO_PI / 3.0)
    s2 = math.sin(theta + TWO_PI / 3.0)
    c2 = math.cos(theta + TWO_PI / 3.0)
    return d * co - q * s, d * c1 - q * s1, d * c2 - q * s2


@njit(cache=True)
def compute_pq(vd, vq, id_, iq):
    """Instantaneous real/reactive power in the dq frame."""
    p = 1.5 * (vd * id_ + vq * iq)
    q = 1.5 * (vq * id_ - vd * iq)
    return p, q


# -------------------------------------------------------------------- PLL

@njit(cache=True)
def pll_step(theta, integ, va, vb, vc, kp, ki, w_nom, dt):
    """Synchronous-reference-frame PLL: PI drives v_q to zero.

    Returns (theta', w, integ', vd, vq).
    """
    vd, vq = abc_to_dq(va, vb, vc, theta)
    u, integ = pi_step(integ, vq, kp, ki, dt, -w_nom, w_nom)
    w = w_nom + u
    theta = theta + w * dt
    theta = theta - TWO_PI * math.floor(theta / TWO_PI)
    return theta, w, integ, vd, vq


# ----------------------------------------------------------- PWM carriers

@njit(cache=True)
def triangle_carrier(phase):
    """Symmetric triangle over one carrier cycle, phase in [0, 1) -> [-1, 1]."""
    ph = phase - math.floor(phase)
    if ph < 0.5:
        return 4.0 * ph - 1.0
    return 3.0 - 4.0 * ph


@njit(cache=True)
def pwm_compare(modulation, carrier_phase):
    """Sampled comparator gate: True while modulation exceeds the carrier."""
    m = min(max(modulation, -1.0), 1.0)
    return m > triangle_carrier(carrier_phase)


@njit(cache=True)
def shifted_square(carrier_phase, level):
    """Square wave toggled where the triangle crosses +level (rising half)
    and -level (falling half); level 0 gives the unshifted 50% square and
    level v_c delays it by v_c/4 of a cycle (90 deg * v_c)."""
    ph = carrier_phase - math.floor(carrier_phase)
    if ph < 0.5:
        return triangle_carrier(ph) > level
    return triangle_carrier(ph) > -level


@njit(cache=True)
def phase_shift_gates(v_c, carrier_phase):
    """Gate signals of both DAB bridges for control value v_c in [0, 1].

    Returns (p_a_top, p_b_top, s_a_top, s_b_top); bottom switches are the
    complements, so no leg can shoot through. Realized fundamental shift of
    the secondary behind the primary is 90 deg * v_c.
    """
    vc = min(max(v_c, 0.0), 1.0)
    p = shifted_square(carrier_phase, 0.0)
    s = shifted_square(carrier_phase, vc)
    return p, not p, s, not s


def phase_shift_modulate(v_c: float, carrier_phase: float):
    """Bridge gate sets for a phase-shift command; see phase_shift_gates."""
    pa, pb, sa, sb = phase_shift_gates(v_c, carrier_phase)
    primary = GateSet(pa, not pa, pb, not pb)
    secondary = GateSet(sa, not sa, sb, not sb)
    return primary, secondary


class GateSet:
    """H-bridge gates: two legs, complementary within each leg."""

    __slots__ = ("a_top", "a_bot", "b_top", "b_bot")

    def __init__(self, a_top, a_bot, b_top, b_bot):
        if (a_top and a_bot) or (b_top and b_bot):
            raise ValueError("shoot-through gate combination")
        self.a_top = bool(a_top)
        self.a_bot = bool(a_bot)
        self.b_top = bool(b_top)
        self.b_bot = bool(b_bot)

    def bridge_sign(self) -> int:
        """+1/-1/0 bridge output polarity (a-leg minus b-leg)."""
        return int(self.a_top) - int(self.b_top)


# ------------------------------------------------------------ PFC control

@njit(cache=True)
def pfc_control_step(outer_integ, inner_integ,
                     v_dc, v_dc_ref, v_rect, dv_rect_dt, i_l,
                     kp_outer, ki_outer, kp_inner, ki_inner,
                     u_max, l_boost, dt):
    """Dual-loop PFC: outer bus-voltage PI scaled by the rectified waveform
    yields the inductor current reference; the inner current PI plus a duty
    feedforward (steady boost ratio and the inductor-voltage demand of the
    moving reference, clamped to the actuator's authority) yields duty.

    Returns (duty, i_ref, outer_integ', inner_integ').
    """
    u, outer_integ = pi_step(outer_integ, v_dc_ref - v_dc,
                             kp_outer, ki_outer, dt, 0.0, u_max)
    i_ref = u * v_rect
    corr, inner_integ = pi_step(inner_integ, i_ref - i_l,
                                kp_inner, ki_inner, dt, -1.0, 1.0)
    v_bus = v_dc if v_dc > 1.0 else 1.0
    v_l_demand = l_boost * u * dv_rect_dt
    lim = 0.45 * v_bus
    v_l_demand = min(max(v_l_demand, -lim), lim)
    ff = 1.0 - (v_rect - v_l_demand) / v_bus
    duty = min(max(ff + corr, 0.0), 1.0)
    return duty, i_ref, outer_integ, inner_integ


# ---------------------------------------------------------- CC/CV charger

@njit(cache=True)
def cccv_step(mode, integ, v_meas, i_meas, i_cc, v_cv, kp, ki, dt):
    """Constant-current / constant-voltage supervisor with one-way latch.

    A single PI acts on the selected error (current in CC, voltage in CV);
    the latch flips to CV the first time the measured voltage reaches the
    preset and never returns. Output v_c in [0, 1] maps to 0..90 deg of DAB
    phase shift. Returns (v_c, mode', integ').
    """
    if mode == MODE_CC and v_meas >= v_cv:
        mode = MODE_CV
    e = (i_cc - i_meas) if mode == MODE_CC else (v_cv - v_meas)
    v_c, integ = pi_step(integ, e, kp, ki, dt, 0.0, 1.0)
    return v_c, mode, integ


# ------------------------------------------------- grid-side VdcQ control

@njit(cache=True)
def vdcq_control_step(vdc_integ, q_integ,
                      pr_states,  # float64[6]: (x1, x2) per phase
                      v_dc, v_dc_ref, q_meas, q_ref, theta,
                      ia, ib, ic, va, vb, vc,
                      kp_vdc, ki_vdc, kp_q, ki_q,
                      kp_pr, kr_pr, wc_pr, w0_pr,
                      id_max, dt):
    """Outer bus-voltage and reactive-power loops, inner per-phase PR loops.

    The reactive loop output is negated: absorbed Q is -(3/2) v_d i_q, so a
    rising Q error must push i_q down. Each phase's converter voltage
    reference is the grid voltage minus the PR action (current into the
    converter rises when the converter voltage drops below the grid), scaled
    by half the bus voltage into a modulation index clamped to [-1, 1].

    Returns (ma, mb, mc, id_ref, iq_ref, vdc_integ', q_integ', saturated).
    """
    id_ref, vdc_integ = pi_step(vdc_integ, v_dc_ref - v_dc,
                                kp_vdc, ki_vdc, dt, -id_max, id_max)
    u_q, q_integ = pi_step(q_integ, q_ref - q_meas,
                           kp_q, ki_q, dt, -id_max, id_max)
    iq_ref = -u_q
    ia_ref, ib_ref, ic_ref = dq_to_abc(id_ref, iq_ref, theta)

    scale = 2.0 / v_dc if v_dc > 1.0 else 2.0
    saturated = False
    m = np.empty(3)
    refs = (ia_ref, ib_ref, ic_ref)
    meas = (ia, ib, ic)
    grid = (va, vb, vc)
    for k in range(3):
        u, x1, x2 = pr_step(pr_states[2 * k], pr_states[2 * k + 1],
                            refs[k] - meas[k], kp_pr, kr_pr, wc_pr, w0_pr, dt)
        pr_states[2 * k] = x1
        pr_states[2 * k + 1] = x2
        mk = (grid[k] - u) * scale
        if mk > 1.0 or mk < -1.0:
            saturated = True
            mk = min(max(mk, -1.0), 1.0)
        m[k] = mk
    return m[0], m[1], m[2], id_ref, iq_ref, vdc_integ, q_integ, saturated


# ------------------------------------------------------- python wrappers

class Pi:
    """Stateful PI wrapper around pi_step."""

    def __init__(self, kp, ki, lo=-math.inf, hi=math.inf):
        self.kp, self.ki, self.lo, self.hi = kp, ki, lo, hi
        self.integ = 0.0

    def step(self, e, dt):
        u, self.integ = pi_step(self.integ, e, self.kp, self.ki, dt,
                                self.lo, self.hi)
        return u


class Pr:
    """Stateful PR wrapper around pr_step."""

    def __init__(self, kp, kr, wc=200.0, w0=377.0):
        self.kp, self.kr, self.wc, self.w0 = kp, kr, wc, w0
        self.x1 = 0.0
        self.x2 = 0.0

    def step(self, e, dt):
        u, self.x1, self.x2 = pr_step(self.x1, self.x2, e, self.kp, self.kr,
                                      self.wc, self.w0, dt)
        return u


class Pll:
    """Grid-voltage tracking PLL, PI gains 0.05 + 1/s by default."""

    def __init__(self, kp=0.05, ki=1.0, w_nom=377.0, theta0=0.0):
        self.kp, self.ki, self.w_nom = kp, ki, w_nom
        self.theta = theta0
        self.integ = 0.0
        self.w = w_nom
        self.vd = 0.0
        self.vq = 0.0

    def step(self, va, vb, vc, dt):
        (self.theta, self.w, self.integ,
         self.vd, self.vq) = pll_step(self.theta, self.integ, va, vb, vc,
                                      self.kp, self.ki, self.w_nom, dt)
        return self.theta, self.w


class CcCv:
    """CC/CV supervisor wrapper; mode is a one-way CC -> CV latch."""

    def __init__(self, i_cc, v_cv, kp=0.01, ki=0.1, v_c0=0.0):
        self.i_cc, self.v_cv, self.kp, self.ki = i_cc, v_cv, kp, ki
        self.mode = MODE_CC
        self.integ = v_c0

    def step(self, v_meas, i_meas, dt):
        v_c, self.mode, self.integ = cccv_step(
            self.mode, self.integ, v_meas, i_meas,
            self.i_cc, self.v_cv, self.kp, self.ki, dt)
        return v_c
