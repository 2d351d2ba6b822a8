"""Compiled stepping kernels for the charging testbeds.

Each kernel advances the whole block chain of one testbed family in the fixed
input -> calculation -> output order: grid source and measurements first, then
controllers, then circuit integration (stages exchange last-step values), then
recording. State and parameters live in flat float64 arrays indexed by the
constants below; the testbed builder owns the layout.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .battery import step_charge, terminal_voltage
from .circuits import boost_step, dab_step_into, vsc_step
from .controls import (abc_to_dq, cccv_step, compute_pq, pfc_control_step,
                       pi_step, pll_step, pr_step, pwm_compare)

# ---------------------------------------------------------- single phase
# state layout
S_I_L1 = 0        # PFC boost inductor current [A]
S_V_DC = 1        # DC bus voltage [V]
S_PFC_OUTER = 2   # outer-loop integrator
S_PFC_INNER = 3   # inner-loop integrator
S_CCCV_INTEG = 4
S_CCCV_MODE = 5   # 0 = CC, 1 = CV
S_I_LR = 6        # DAB series inductor current [A]
S_V_X = 7         # DAB output capacitor voltage [V]
S_I_LOUT = 8      # output filter inductor current = battery current [A]
S_IT = 9          # battery charge deficit [Ah]
S_I_DAB_IN = 10   # last-step average DAB primary draw [A]
SP_NSTATE = 11

# parameter layout
P_VSRC_PEAK = 0
P_W_SRC = 1
P_F_PWM = 2
P_L1 = 3
P_C_DC = 4
P_VDC_REF = 5
P_KP_OUTER = 6
P_KI_OUTER = 7
P_KP_INNER = 8
P_KI_INNER = 9
P_U_MAX = 10
P_I_CC = 11
P_V_CV = 12
P_KP_CCCV = 13
P_KI_CCCV = 14
P_L_R = 15
P_C_OUT = 16
P_N_RATIO = 17
P_L_OUT = 18
P_R_HARNESS = 19
P_BAT_E0 = 20
P_BAT_A = 21
P_BAT_B = 22
P_BAT_K = 23
P_BAT_CAP = 24
P_BAT_RINT = 25
P_PFC_ENABLED = 26  # 1 = closed loop, 0 = fixed duty
P_FIXED_DUTY = 27
P_LOAD_MODE = 28    # 0 = DAB charger load, 1 = resistive bus load
P_R_LOAD = 29
P_R_LR = 30         # transformer winding resistance [ohm]
SP_NPARAM = 31

SP_SIGNALS = ("i_batt", "v_batt", "p_chg", "theta_shift", "v_dc", "i_l",
              "soc", "v_src", "i_src", "i_ref", "duty", "mode",
              "v_out_filt", "v2_peak")

# fault codes shared by both kernels
FAULT_FRONT_END = 1   # PFC boost / grid converter
FAULT_DAB = 2
FAULT_FILTER = 3
FAULT_BATTERY = 4

SP_FAULT_NAMES = {FAULT_FRONT_END: "pfc_boost", FAULT_DAB: "dab",
                  FAULT_FILTER: "output_filter", FAULT_BATTERY: "battery"}


@njit(cache=True)
def advance_single_phase(state, prm, step0, n, decim, out, dt):
    """Level 1/2 charger chain (or standalone PFC when load mode is 1)."""
    frac = np.empty(4)
    k = 0
    fault = -1
    fault_step = -1
    dphi = prm[P_F_PWM] * dt
    charger = prm[P_LOAD_MODE] < 0.5
    pfc_closed = prm[P_PFC_ENABLED] > 0.5
    for idx in range(n):
        g = step0 + idx
        t = g * dt

        # --- inputs and measurements (last-step values)
        wt = prm[P_W_SRC] * t
        sin_wt = math.sin(wt)
        v_ac = prm[P_VSRC_PEAK] * sin_wt
        v_rect = abs(v_ac)
        sgn = 1.0 if sin_wt >= 0.0 else -1.0
        dv_rect = prm[P_VSRC_PEAK] * prm[P_W_SRC] * math.cos(wt) * sgn
        i_l1 = state[S_I_L1]
        v_dc = state[S_V_DC]
        i_lr = state[S_I_LR]
        v_x = state[S_V_X]
        i_lout = state[S_I_LOUT]
        it = state[S_IT]
        v_batt = terminal_voltage(it, i_lout, prm[P_BAT_E0], prm[P_BAT_A],
                                  prm[P_BAT_B], prm[P_BAT_K], prm[P_BAT_CAP],
                                  prm[P_BAT_RINT])
        v_meas = v_batt + prm[P_R_HARNESS] * i_lout

        # --- controllers
        v_c = 0.0
        if charger:
            mode = 1 if state[S_CCCV_MODE] > 0.5 else 0
            v_c, mode, integ = cccv_step(mode, state[S_CCCV_INTEG], v_meas,
                                         i_lout, prm[P_I_CC], prm[P_V_CV],
                                         prm[P_KP_CCCV], prm[P_KI_CCCV], dt)
            state[S_CCCV_INTEG] = integ
            state[S_CCCV_MODE] = float(mode)
        if pfc_closed:
            duty, i_ref, o_int, i_int = pfc_control_step(
                state[S_PFC_OUTER], state[S_PFC_INNER],
                v_dc, prm[P_VDC_REF], v_rect, dv_rect, i_l1,
                prm[P_KP_OUTER], prm[P_KI_OUTER],
                prm[P_KP_INNER], prm[P_KI_INNER],
                prm[P_U_MAX], prm[P_L1], dt)
            state[S_PFC_OUTER] = o_int
            state[S_PFC_INNER] = i_int
        else:
            duty = prm[P_FIXED_DUTY]
            i_ref = 0.0
        phi = g * dphi
        phi -= math.floor(phi)
        gate = pwm_compare(2.0 * duty - 1.0, phi)

        # --- circuit integration
        i_bus_load = state[S_I_DAB_IN] if charger else v_dc / prm[P_R_LOAD]
        i_l1_n, v_dc_n, _cond = boost_step(i_l1, v_dc, gate, v_rect,
                                           i_bus_load, prm[P_L1],
                                           prm[P_C_DC], dt)
        if charger:
            i_lr_n, v_x_n, i_dab_in = dab_step_into(
                frac, i_lr, v_x, v_c, phi, dphi, v_dc, i_lout,
                prm[P_N_RATIO], prm[P_L_R], prm[P_R_LR], prm[P_C_OUT], dt)
            di = (v_x - v_batt - prm[P_R_HARNESS] * i_lout) / prm[P_L_OUT]
            i_lout_n = i_lout + di * dt
            it_n, soc, _sat = step_charge(it, i_lout, dt, prm[P_BAT_CAP])
        else:
            i_lr_n = i_lr
            v_x_n = v_x
            i_dab_in = 0.0
            i_lout_n = 0.0
            it_n = it
            soc = 100.0 * (1.0 - it / prm[P_BAT_CAP])

        state[S_I_L1] = i_l1_n
        state[S_V_DC] = v_dc_n
        state[S_I_LR] = i_lr_n
        state[S_V_X] = v_x_n
        state[S_I_LOUT] = i_lout_n
        state[S_IT] = it_n
        state[S_I_DAB_IN] = i_dab_in

        if not (math.isfinite(i_l1_n) and math.isfinite(v_dc_n)):
            fault = FAULT_FRONT_END
            fault_step = g
            break
        if not (math.isfinite(i_lr_n) and math.isfinite(v_x_n)):
            fault = FAULT_DAB
            fault_step = g
            break
        if not math.isfinite(i_lout_n):
            fault = FAULT_FILTER
            fault_step = g
            break
        if not math.isfinite(it_n):
            fault = FAULT_BATTERY
            fault_step = g
            break

        # --- output recording
        if (g + 1) % decim == 0:
            t1 = (g + 1) * dt
            v_batt_rec = terminal_voltage(it_n, i_lout_n, prm[P_BAT_E0],
                                          prm[P_BAT_A], prm[P_BAT_B],
                                          prm[P_BAT_K], prm[P_BAT_CAP],
                                          prm[P_BAT_RINT])
            v_ac1 = prm[P_VSRC_PEAK] * math.sin(prm[P_W_SRC] * t1)
            out[k, 0] = t1
            out[k, 1] = i_lout_n
            out[k, 2] = v_batt_rec
            out[k, 3] = v_batt_rec * i_lout_n
            out[k, 4] = 90.0 * v_c
            out[k, 5] = v_dc_n
            out[k, 6] = i_l1_n
            out[k, 7] = soc
            out[k, 8] = v_ac1
            out[k, 9] = i_l1_n if v_ac1 >= 0.0 else -i_l1_n
            out[k, 10] = i_ref
            out[k, 11] = duty
            out[k, 12] = state[S_CCCV_MODE]
            out[k, 13] = v_x_n
            out[k, 14] = prm[P_N_RATIO] * v_x_n
            k += 1
    return k, fault, fault_step


# ------------------------------------------------------------ three phase
T_I_A = 0
T_I_B = 1
T_I_C = 2
T_V_DC = 3
T_PLL_THETA = 4
T_PLL_INTEG = 5
T_VDC_INTEG = 6
T_Q_INTEG = 7
T_PR_A1 = 8      # PR states: (x1, x2) per phase
T_PR_A2 = 9
T_PR_B1 = 10
T_PR_B2 = 11
T_PR_C1 = 12
T_PR_C2 = 13
T_CCCV_INTEG = 14
T_CCCV_MODE = 15
T_I_LR = 16
T_V_X = 17
T_I_LOUT = 18
T_IT = 19
T_I_DAB_IN = 20
T_VDC_REF_F = 21  # softened bus-voltage setpoint
TP_NSTATE = 22

Q_VPH_PEAK = 0
Q_W_GRID = 1
Q_F_PWM = 2
Q_R_G = 3
Q_L_G = 4
Q_C_DC = 5
Q_VDC_REF = 6
Q_Q_REF = 7
Q_KP_VDC = 8
Q_KI_VDC = 9
Q_KP_Q = 10
Q_KI_Q = 11
Q_KP_PLL = 12
Q_KI_PLL = 13
Q_KP_PR = 14
Q_KR_PR = 15
Q_WC_PR = 16
Q_W0_PR = 17
Q_ID_MAX = 18
Q_I_CC = 19
Q_V_CV = 20
Q_KP_CCCV = 21
Q_KI_CCCV = 22
Q_L_R = 23
Q_C_OUT = 24
Q_N_RATIO = 25
Q_L_OUT = 26
Q_R_HARNESS = 27
Q_BAT_E0 = 28
Q_BAT_A = 29
Q_BAT_B = 30
Q_BAT_K = 31
Q_BAT_CAP = 32
Q_BAT_RINT = 33
Q_R_LR = 34
Q_VREF_TAU = 35   # setpoint-shaping time constant [s]
TP_NPARAM = 36

TP_SIGNALS = ("i_batt", "v_batt", "p_chg", "theta_shift", "v_dc", "q",
              "soc", "v_a", "i_a", "p_grid", "v_q_pll", "i_d_ref", "i_q_ref",
              "mode", "v_out_filt", "v2_peak")

TP_FAULT_NAMES = {FAULT_FRONT_END: "grid_vsc", FAULT_DAB: "dab",
                  FAULT_FILTER: "output_filter", FAULT_BATTERY: "battery"}

_TWO_THIRDS_PI = 2.0 * math.pi / 3.0


@njit(cache=True)
def advance_three_phase(state, prm, step0, n, decim, out, dt):
    """Level 3 chain: grid VSC with PLL + VdcQ + PR control, DAB, battery."""
    frac = np.empty(4)
    k = 0
    fault = -1
    fault_step = -1
    dphi = prm[Q_F_PWM] * dt
    for idx in range(n):
        g = step0 + idx
        t = g * dt

        # --- inputs and measurements
        wt = prm[Q_W_GRID] * t
        vp = prm[Q_VPH_PEAK]
        va = vp * math.cos(wt)
        vb = vp * math.cos(wt - _TWO_THIRDS_PI)
        vc = vp * math.cos(wt + _TWO_THIRDS_PI)
        ia = state[T_I_A]
        ib = state[T_I_B]
        ic = state[T_I_C]
        v_dc = state[T_V_DC]
        i_lr = state[T_I_LR]
        v_x = state[T_V_X]
        i_lout = state[T_I_LOUT]
        it = state[T_IT]
        v_batt = terminal_voltage(it, i_lout, prm[Q_BAT_E0], prm[Q_BAT_A],
                                  prm[Q_BAT_B], prm[Q_BAT_K], prm[Q_BAT_CAP],
                                  prm[Q_BAT_RINT])
        v_meas = v_batt + prm[Q_R_HARNESS] * i_lout

        # --- controllers
        theta, _w, pll_int, vd, vq = pll_step(
            state[T_PLL_THETA], state[T_PLL_INTEG], va, vb, vc,
            prm[Q_KP_PLL], prm[Q_KI_PLL], prm[Q_W_GRID], dt)
        state[T_PLL_THETA] = theta
        state[T_PLL_INTEG] = pll_int
        id_m, iq_m = abc_to_dq(ia, ib, ic, theta)
        p_grid, q_grid = compute_pq(vd, vq, id_m, iq_m)

        mode = 1 if state[T_CCCV_MODE] > 0.5 else 0
        v_c_cmd, mode, cc_int = cccv_step(mode, state[T_CCCV_INTEG], v_meas,
                                          i_lout, prm[Q_I_CC], prm[Q_V_CV],
                                          prm[Q_KP_CCCV], prm[Q_KI_CCCV], dt)
        state[T_CCCV_INTEG] = cc_int
        state[T_CCCV_MODE] = float(mode)

        # setpoint shaping keeps the bus step inside the converter's
        # modulation headroom instead of ringing through it
        ref_f = state[T_VDC_REF_F]
        ref_f += (prm[Q_VDC_REF] - ref_f) * dt / prm[Q_VREF_TAU]
        state[T_VDC_REF_F] = ref_f

        id_max = prm[Q_ID_MAX]
        id_ref, vdc_int = pi_step(state[T_VDC_INTEG], ref_f - v_dc,
                                  prm[Q_KP_VDC], prm[Q_KI_VDC], dt,
                                  -id_max, id_max)
        u_q, q_int = pi_step(state[T_Q_INTEG], prm[Q_Q_REF] - q_grid,
                             prm[Q_KP_Q], prm[Q_KI_Q], dt, -id_max, id_max)
        iq_ref = -u_q
        state[T_VDC_INTEG] = vdc_int
        state[T_Q_INTEG] = q_int

        ct = math.cos(theta)
        st = math.sin(theta)
        c1 = math.cos(theta - _TWO_THIRDS_PI)
        s1 = math.sin(theta - _TWO_THIRDS_PI)
        c2 = math.cos(theta + _TWO_THIRDS_PI)
        s2 = math.sin(theta + _TWO_THIRDS_PI)
        ia_ref = id_ref * ct - iq_ref * st
        ib_ref = id_ref * c1 - iq_ref * s1
        ic_ref = id_ref * c2 - iq_ref * s2

        ua, x1, x2 = pr_step(state[T_PR_A1], state[T_PR_A2], ia_ref - ia,
                             prm[Q_KP_PR], prm[Q_KR_PR], prm[Q_WC_PR],
                             prm[Q_W0_PR], dt)
        state[T_PR_A1] = x1
        state[T_PR_A2] = x2
        ub, x1, x2 = pr_step(state[T_PR_B1], state[T_PR_B2], ib_ref - ib,
                             prm[Q_KP_PR], prm[Q_KR_PR], prm[Q_WC_PR],
                             prm[Q_W0_PR], dt)
        state[T_PR_B1] = x1
        state[T_PR_B2] = x2
        uc, x1, x2 = pr_step(state[T_PR_C1], state[T_PR_C2], ic_ref - ic,
                             prm[Q_KP_PR], prm[Q_KR_PR], prm[Q_WC_PR],
                             prm[Q_W0_PR], dt)
        state[T_PR_C1] = x1
        state[T_PR_C2] = x2

        scale = 2.0 / v_dc if v_dc > 1.0 else 2.0
        ma = min(max((va - ua) * scale, -1.0), 1.0)
        mb = min(max((vb - ub) * scale, -1.0), 1.0)
        mc = min(max((vc - uc) * scale, -1.0), 1.0)

        phi = g * dphi
        phi -= math.floor(phi)
        sa = 1.0 if pwm_compare(ma, phi) else 0.0
        sb = 1.0 if pwm_compare(mb, phi) else 0.0
        sc = 1.0 if pwm_compare(mc, phi) else 0.0

        # --- circuit integration
        ia_n, ib_n, ic_n, v_dc_n = vsc_step(ia, ib, ic, v_dc, sa, sb, sc,
                                            va, vb, vc, state[T_I_DAB_IN],
                                            prm[Q_R_G], prm[Q_L_G],
                                            prm[Q_C_DC], dt)
        i_lr_n, v_x_n, i_dab_in = dab_step_into(
            frac, i_lr, v_x, v_c_cmd, phi, dphi, v_dc, i_lout,
            prm[Q_N_RATIO], prm[Q_L_R], prm[Q_R_LR], prm[Q_C_OUT], dt)
        di = (v_x - v_batt - prm[Q_R_HARNESS] * i_lout) / prm[Q_L_OUT]
        i_lout_n = i_lout + di * dt
        it_n, soc, _sat = step_charge(it, i_lout, dt, prm[Q_BAT_CAP])

        state[T_I_A] = ia_n
        state[T_I_B] = ib_n
        state[T_I_C] = ic_n
        state[T_V_DC] = v_dc_n
        state[T_I_LR] = i_lr_n
        state[T_V_X] = v_x_n
        state[T_I_LOUT] = i_lout_n
        state[T_IT] = it_n
        state[T_I_DAB_IN] = i_dab_in

        if not (math.isfinite(ia_n) and math.isfinite(ib_n)
                and math.isfinite(ic_n) and math.isfinite(v_dc_n)):
            fault = FAULT_FRONT_END
            fault_step = g
            break
        if not (math.isfinite(i_lr_n) and math.isfinite(v_x_n)):
            fault = FAULT_DAB
            fault_step = g
            break
        if not math.isfinite(i_lout_n):
            fault = FAULT_FILTER
            fault_step = g
            break
        if not math.isfinite(it_n):
            fault = FAULT_BATTERY
            fault_step = g
            break

        # --- output recording
        if (g + 1) % decim == 0:
            t1 = (g + 1) * dt
            v_batt_rec = terminal_voltage(it_n, i_lout_n, prm[Q_BAT_E0],
                                          prm[Q_BAT_A], prm[Q_BAT_B],
                                          prm[Q_BAT_K], prm[Q_BAT_CAP],
                                          prm[Q_BAT_RINT])
            out[k, 0] = t1
            out[k, 1] = i_lout_n
            out[k, 2] = v_batt_rec
            out[k, 3] = v_batt_rec * i_lout_n
            out[k, 4] = 90.0 * v_c_cmd
            out[k, 5] = v_dc_n
            out[k, 6] = q_grid
            out[k, 7] = soc
            out[k, 8] = va
            out[k, 9] = ia_n
            out[k, 10] = p_grid
            out[k, 11] = vq
            out[k, 12] = id_ref
            out[k, 13] = iq_ref
            out[k, 14] = state[T_CCCV_MODE]
            out[k, 15] = v_x_n
            out[k, 16] = prm[Q_N_RATIO] * v_x_n
            k += 1
    return k, fault, fault_step
