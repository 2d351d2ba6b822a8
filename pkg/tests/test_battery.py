"""Battery model: curve extraction, SOC integration, terminal voltage."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evchargesim.battery import (Battery, BatteryParameterError, BatteryParams,
                                 extract_curve_params, open_circuit_voltage,
                                 soc_from_charge, step_charge,
                                 terminal_voltage)

PACK = BatteryParams()


def ocv(it, p=PACK):
    return open_circuit_voltage(it, p.e0, p.a_amp, p.b_inv, p.k_pol,
                                p.capacity_ah)


class TestExtraction:
    def test_exponential_amplitude(self):
        assert PACK.a_amp == pytest.approx(291.0 - 270.0)

    def test_exponential_decay(self):
        assert PACK.b_inv == pytest.approx(3.0 / 1.96)

    def test_curve_hits_full_voltage(self):
        assert ocv(0.0) == pytest.approx(291.0, abs=1e-9)

    def test_curve_hits_nominal_anchor(self):
        assert ocv(36.17) == pytest.approx(250.0, abs=1e-9)

    def test_exponential_zone_residual(self):
        # the three-constant curve cannot also pass exactly through
        # (q_exp, v_exp); the residual with these anchors is ~0.94 V
        assert abs(ocv(PACK.q_exp_ah) - PACK.v_exp) <= 1.0

    @pytest.mark.parametrize("kwargs", [
        dict(v_full=270.0, v_exp=270.0),        # equal voltages
        dict(q_exp_ah=0.0),                     # zero exponential zone
        dict(q_nom_ah=41.0),                    # nominal beyond capacity
        dict(v_nom=295.0),                      # nominal above full
    ])
    def test_degenerate_inputs_rejected(self, kwargs):
        with pytest.raises(BatteryParameterError):
            BatteryParams(**kwargs)

    def test_direct_extraction_matches_params(self):
        e0, a, b, k = extract_curve_params(291.0, 270.0, 250.0, 1.96, 36.17,
                                           40.0)
        assert (e0, a, b, k) == (PACK.e0, PACK.a_amp, PACK.b_inv, PACK.k_pol)


class TestSoc:
    def test_full(self):
        assert soc_from_charge(0.0, 40.0) == (100.0, False)

    def test_empty(self):
        assert soc_from_charge(40.0, 40.0) == (0.0, False)

    def test_linear(self):
        soc, flagged = soc_from_charge(36.0, 40.0)
        assert soc == pytest.approx(10.0)
        assert not flagged

    def test_out_of_range_clamps_and_flags(self):
        soc, flagged = soc_from_charge(45.0, 40.0)
        assert soc == 0.0 and flagged
        soc, flagged = soc_from_charge(-1.0, 40.0)
        assert soc == 100.0 and flagged

    def test_quarter_hour_charge_gain(self):
        # 5 A for 25 min into 40 Ah: 100 * (5 * 25/60) / 40 points
        batt = Battery(soc0=10.0)
        dt = 0.1
        for _ in range(int(1500 / dt)):
            batt.step(5.0, dt)
        assert batt.state.soc - 10.0 == pytest.approx(
            100.0 * (5.0 * 25.0 / 60.0) / 40.0, abs=1e-6)

    def test_step_matches_closed_form(self):
        batt = Battery(soc0=50.0)
        it0 = batt.state.it_ah
        dt = 0.05
        currents = [3.0, -1.5, 8.0, 0.0, 2.25]
        for _ in range(200):
            for i in currents:
                batt.step(i, dt)
        expected_it = it0 - sum(currents) * 200 * dt / 3600.0
        assert batt.state.it_ah == pytest.approx(expected_it, rel=1e-12)

    def test_saturation_flag_at_full(self):
        batt = Battery(soc0=99.999)
        batt.step(5000.0, 60.0)
        assert batt.state.soc == 100.0
        assert batt.state.saturated


class TestTerminalVoltage:
    def test_open_circuit_at_full(self):
        batt = Battery(soc0=100.0)
        assert batt.voltage(0.0) == pytest.approx(291.0, abs=1e-9)

    def test_zero_current_is_curve_value(self):
        batt = Battery(soc0=10.0)
        assert batt.voltage(0.0) == pytest.approx(ocv(36.0))

    def test_charging_raises_discharging_lowers(self):
        batt = Battery(soc0=50.0)
        v0 = batt.voltage(0.0)
        assert batt.voltage(10.0) > v0
        assert batt.voltage(-10.0) < v0

    def test_nonfinite_input_rejected(self):
        batt = Battery(soc0=50.0)
        with pytest.raises(ValueError):
            batt.step(math.nan, 0.1)

    @given(st.floats(5.0, 95.0), st.floats(0.1, 80.0))
    @settings(max_examples=50, deadline=None)
    def test_charging_soc_nondecreasing(self, soc0, i):
        batt = Battery(soc0=soc0)
        prev = batt.state.soc
        for _ in range(20):
            soc = batt.step(i, 1.0).soc
            assert soc >= prev
            prev = soc
