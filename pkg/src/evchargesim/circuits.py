"""Power-stage models: diode bridge, PFC boost, dual active bridge with
high-frequency transformer, output LC filter, three-phase voltage source
converter. All stages are explicit difference-equation blocks advanced once
per simulation step; interfaces exchange last-step values.

The DAB stage resolves its bridge transitions at sub-step resolution: within
one step the series-inductor / output-capacitor pair is integrated in closed
form segment by segment between carrier crossings, so realized phase shift is
continuous in the command rather than quantized to the step grid. Switches
and diodes are ideal (zero drop, zero loss).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# PFC conduction states
COND_SWITCH_ON = 0
COND_DIODE_ON = 1
COND_CUTOFF = 2


@njit(cache=True)
def diode_bridge(v_ac):
    """Ideal full-bridge rectifier: v_rect = |v_ac|."""
    return abs(v_ac)


@njit(cache=True)
def boost_step(i_l, v_dc, gate, v_rect, i_load, l1, c_dc, ts):
    """PFC boost stage, forward difference with DCM clamp.

    Gate on: inductor charges from the rectified source, diode blocks.
    Gate off with positive current: inductor discharges into the DC bus.
    Returns (i_l', v_dc', conduction).
    """
    if gate:
        i_diode = 0.0
        i_new = i_l + (v_rect / l1) * ts
        cond = COND_SWITCH_ON
    elif i_l > 0.0:
        i_diode = i_l
        i_new = i_l + ((v_rect - v_dc) / l1) * ts
        cond = COND_DIODE_ON
    else:
        i_diode = 0.0
        i_new = i_l + (v_rect / l1) * ts if v_rect > v_dc else 0.0
        cond = COND_CUTOFF
    if i_new < 0.0:
        i_new = 0.0  # discontinuous conduction: diode blocks reverse current
    v_new = v_dc + ((i_diode - i_load) / c_dc) * ts
    return i_new, v_new, cond


@njit(cache=True)
def lc_filter_step(i_l, v_c, v_in, i_out, l, c, ts):
    """Series-L shunt-C filter, forward difference on last-step values."""
    i_new = i_l + ((v_in - v_c) / l) * ts
    v_new = v_c + ((i_l - i_out) / c) * ts
    return i_new, v_new


@njit(cache=True)
def vsc_step(ia, ib, ic, v_dc, sa, sb, sc, va, vb, vc, i_dc_load,
             rg, lg, c_dc, ts):
    """Three-phase two-level converter with grid impedance, three-wire.

    Pole voltages are gate-selected +-v_dc/2; the common mode is removed
    (no neutral path), which keeps ia+ib+ic at zero. DC side folds the gated
    phase currents into the bus capacitor. Returns (ia', ib', ic', v_dc').
    """
    pa = v_dc * (sa - 0.5)
    pb = v_dc * (sb - 0.5)
    pc = v_dc * (sc - 0.5)
    cm = (pa + pb + pc) / 3.0
    ia_n = ia + ((va - (pa - cm) - rg * ia) / lg) * ts
    ib_n = ib + ((vb - (pb - cm) - rg * ib) / lg) * ts
    ic_n = ic + ((vc - (pc - cm) - rg * ic) / lg) * ts
    i_dc_in = sa * ia + sb * ib + sc * ic
    v_dc_n = v_dc + ((i_dc_in - i_dc_load) / c_dc) * ts
    return ia_n, ib_n, ic_n, v_dc_n


# ------------------------------------------------------------------ DAB

@njit(cache=True)
def _bridge_sign(phase, level):
    """+1 while the square shifted by ``level`` is high, else -1."""
    ph = phase - math.floor(phase)
    if ph < 0.5:
        hi = (4.0 * ph - 1.0) > level
    else:
        hi = (3.0 - 4.0 * ph) > -level
    return 1.0 if hi else -1.0


@njit(cache=True)
def _collect_crossings(phi0, dphi, v_c, frac):
    """Bridge transition instants inside (phi0, phi0+dphi], as step fractions.

    Candidates: primary square toggles at carrier phase 0.25 and 0.75,
    secondary at the same points delayed by v_c/4. Returns the count with
    ``frac`` filled in ascending order (at most 4).
    """
    n = 0
    end = phi0 + dphi
    for j in range(4):
        if j == 0:
            base = 0.25
        elif j == 1:
            base = 0.75
        elif j == 2:
            base = 0.25 + 0.25 * v_c
        else:
            base = 0.75 + 0.25 * v_c
        x = base + math.floor(phi0 - base) + 1.0
        if x <= end:
            f = (x - phi0) / dphi
            k = n
            while k > 0 and frac[k - 1] > f:
                frac[k] = frac[k - 1]
                k -= 1
            frac[k] = f
            n += 1
    return n


@njit(cache=True)
def _lc_segment(i, v, s1, s2, v_in, i_out, n_ratio, l_r, r_lr, c_out, tau):
    """Exact update of the series inductor / output capacitor pair over a
    segment with constant bridge polarities s1, s2 and frozen output current.

        L di/dt = s1*v_in - s2*n*v - R*i        C dv/dt = s2*n*i - i_out

    R is the series (transformer winding) resistance; it must keep the pair
    underdamped (R < 2*n*sqrt(L/C)). Returns (i', v', q1) with q1 the charge
    drawn from the input source.
    """
    w0 = n_ratio / math.sqrt(l_r * c_out)
    alpha = r_lr / (2.0 * l_r)
    wd = math.sqrt(w0 * w0 - alpha * alpha)
    i_eq = s2 * i_out / n_ratio
    v_eq = s1 * s2 * v_in / n_ratio - r_lr * i_out / (n_ratio * n_ratio)
    u = i - i_eq
    y = v - v_eq
    th = wd * tau
    cs = math.cos(th)
    sn = math.sin(th)
    ex = math.exp(-alpha * tau)
    k_lv = s2 * n_ratio / l_r
    k_cv = s2 * n_ratio / c_out
    u_n = ex * ((cs - alpha * sn / wd) * u - (k_lv / wd) * sn * y)
    y_n = ex * ((k_cv / wd) * sn * u + (cs + alpha * sn / wd) * y)
    # charge integral: u(t) = e^{-a t} (A cos wd t + B sin wd t)
    b = (-alpha * u - k_lv * y) / wd
    int_u = (u * (alpha + ex * (-alpha * cs + wd * sn))
             + b * (wd - ex * (alpha * sn + wd * cs))) / (w0 * w0)
    q1 = s1 * (i_eq * tau + int_u)
    return i_eq + u_n, v_eq + y_n, q1


@njit(cache=True)
def dab_step_into(frac, i_lr, v_out, v_c, phi0, dphi, v_dc_in, i_out,
                  n_ratio, l_r, r_lr, c_out, ts):
    """dab_step with a caller-provided crossing buffer (hot-loop variant)."""
    n = _collect_crossings(phi0, dphi, v_c, frac)
    q_total = 0.0
    t0 = 0.0
    for k in range(n + 1):
        t1 = frac[k] if k < n else 1.0
        tau = (t1 - t0) * ts
        if tau > 0.0:
            # sample polarities just inside the segment
            phi_mid = phi0 + 0.5 * (t0 + t1) * dphi
            s1 = _bridge_sign(phi_mid, 0.0)
            s2 = _bridge_sign(phi_mid, v_c)
            i_lr, v_out, q = _lc_segment(i_lr, v_out, s1, s2, v_dc_in, i_out,
                                         n_ratio, l_r, r_lr, c_out, tau)
            q_total += q
        t0 = t1
    return i_lr, v_out, q_total / ts


@njit(cache=True)
def dab_step(i_lr, v_out, v_c, phi0, dphi, v_dc_in, i_out,
             n_ratio, l_r, r_lr, c_out, ts):
    """Advance the DAB stage one step with sub-step switching resolution.

    v_c in [-1, 1] commands the secondary-bridge shift (90 deg per unit);
    phi0 is the carrier phase at step start and dphi the phase advanced per
    step. i_out is the current drawn from the output capacitor node (frozen
    over the step). Returns (i_lr', v_out', i_in_avg) where i_in_avg is the
    step-average current drawn from the input DC source.
    """
    frac = np.empty(4)
    return dab_step_into(frac, i_lr, v_out, v_c, phi0, dphi, v_dc_in, i_out,
                         n_ratio, l_r, r_lr, c_out, ts)


@njit(cache=True)
def _dab_stiff_cycle(i_lr, v_in, v_out, v_c, n_ratio, l_r, f_sw, ts, n_steps):
    """DAB between two stiff DC sources; piecewise-linear exact inductor
    current. Returns (i_lr', q_in, q_out) accumulated over n_steps."""
    dphi = f_sw * ts
    q_in = 0.0
    q_out = 0.0
    frac = np.empty(4)
    for step in range(n_steps):
        phi0 = step * dphi
        phi0 -= math.floor(phi0)
        n = _collect_crossings(phi0, dphi, v_c, frac)
        t0 = 0.0
        for k in range(n + 1):
            t1 = frac[k] if k < n else 1.0
            tau = (t1 - t0) * ts
            if tau > 0.0:
                phi_mid = phi0 + 0.5 * (t0 + t1) * dphi
                s1 = _bridge_sign(phi_mid, 0.0)
                s2 = _bridge_sign(phi_mid, v_c)
                slope = (s1 * v_in - s2 * n_ratio * v_out) / l_r
                area = i_lr * tau + 0.5 * slope * tau * tau
                q_in += s1 * area
                q_out += s2 * n_ratio * area
                i_lr += slope * tau
            t0 = t1
    return i_lr, q_in, q_out


def dab_average_power(v_in, v_out, theta_deg, l_r, f_sw=2000.0, ts=20e-6,
                      cycles=40):
    """Cycle-averaged switched DAB power between stiff sources.

    Positive theta lags the secondary bridge and moves power from input to
    output. Averaged over whole carrier cycles the inductor's initial
    condition does not bias the result. Returns (p_in, p_out) [W].
    """
    v_c = theta_deg / 90.0
    steps_per_cycle = 1.0 / (f_sw * ts)
    n_steps = int(round(cycles * steps_per_cycle))
    _, q_in, q_out = _dab_stiff_cycle(0.0, v_in, v_out, v_c, 1.0, l_r,
                                      f_sw, ts, n_steps)
    t_total = n_steps * ts
    return v_in * q_in / t_total, v_out * q_out / t_total
