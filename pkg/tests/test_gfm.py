"""Grid-forming battery controller: fixed point, droop law, soft-charge ramp."""

import math

import numpy as np
import pytest

from blackstartsim.converters import (
    GfmBessParams,
    GfmBessState,
    gfm_controller_step,
    soft_charge_reference,
)

W0 = 2 * math.pi * 50.0


def test_soft_charge_reference_examples():
    assert soft_charge_reference(0.0) == 0.0
    assert soft_charge_reference(0.25) == pytest.approx(0.5)
    assert soft_charge_reference(0.5) == 1.0
    assert soft_charge_reference(7.3) == 1.0
    with pytest.raises(ValueError):
        soft_charge_reference(-1.0)


def test_soft_charge_reference_monotone():
    t = np.linspace(0, 1, 201)
    s = np.array([soft_charge_reference(x) for x in t])
    assert np.all(np.diff(s) >= 0)
    assert np.all((s >= 0) & (s <= 1))


def test_zero_error_fixed_point_exact():
    params = GfmBessParams()
    state = GfmBessState(soft_charge_scale=1.0)
    state, _ = gfm_controller_step(1.0, 0.0, state, params, 50e-6)
    assert state.v_d == pytest.approx(1.0, abs=1e-15)
    assert state.omega == pytest.approx(W0, abs=1e-12)
    assert state.v_q == 0.0


def test_fixed_point_output_is_pure_balanced_50hz_over_one_second():
    """With v_rms = v_ref and p_meas = p_ref, the output stays a balanced
    50 Hz set of the reference magnitude, drift below 1e-6 pu."""
    dt = 50e-6
    params = GfmBessParams()
    state = GfmBessState(soft_charge_scale=1.0)
    n = round(1.0 / dt)
    worst = 0.0
    for k in range(n):
        state, v_abc = gfm_controller_step(1.0, 0.0, state, params, dt)
        t = (k + 1) * dt
        ideal = [math.cos(W0 * t), math.cos(W0 * t - 2 * math.pi / 3),
                 math.cos(W0 * t + 2 * math.pi / 3)]
        worst = max(worst, max(abs(a - b) for a, b in zip(v_abc, ideal)))
    assert worst < 1e-6


def test_droop_law_example():
    # p_meas - p_ref = +50 MW (1 pu of rated power) with k_p = 0.05 -> 47.5 Hz
    params = GfmBessParams()
    state = GfmBessState(soft_charge_scale=1.0)
    for _ in range(100000):  # let the droop-path power filter converge (5 s)
        state, _ = gfm_controller_step(1.0, 50.0, state, params, 50e-6)
    assert state.omega / (2 * math.pi) == pytest.approx(47.5, abs=1e-6)


def test_droop_steady_state_identity():
    params = GfmBessParams()
    state = GfmBessState(soft_charge_scale=1.0, p_ref_mw=10.0)
    for _ in range(40000):
        state, _ = gfm_controller_step(1.0, 24.0, state, params, 50e-6)
    lhs = (state.omega - params.w0) / params.w0
    rhs = params.k_p * (state.p_ref_mw - state.p_filt_mw) / params.p_rated_mw
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert lhs == pytest.approx(params.k_p * (10.0 - 24.0) / 50.0, abs=1e-4)


def test_error_filter_and_kv_path():
    """A sustained RMS error feeds v_d through k_v with unity-DC-gain filtering."""
    params = GfmBessParams()
    state = GfmBessState(soft_charge_scale=1.0)
    for _ in range(200000):  # >> filter time constant
        state, _ = gfm_controller_step(0.95, 0.0, state, params, 50e-6)
    assert state.v_d == pytest.approx(1.0 + params.k_v * 0.05, rel=1e-6)


def test_frequency_trim_restores_nominal():
    params = GfmBessParams(f_trim_mw_per_hz_s=20.0)
    state = GfmBessState(soft_charge_scale=1.0)
    for _ in range(400000):  # 20 s
        state, _ = gfm_controller_step(1.0, 2.5, state, params, 50e-6)
    assert state.omega / (2 * math.pi) == pytest.approx(50.0, abs=1e-3)
    assert state.p_trim_mw == pytest.approx(2.5, abs=0.05)


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        GfmBessParams(k_p=0.0)
    with pytest.raises(ValueError):
        GfmBessParams(k_p=1.5)
    with pytest.raises(ValueError):
        GfmBessParams(s_rated_mva=-1)
