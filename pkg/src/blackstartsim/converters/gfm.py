"""Grid-forming battery controller: RMS-error voltage magnitude shaping plus
power/frequency droop setting the source angle.

The controller output is a balanced per-phase voltage command (pu, peak = pu).
Soft charge scales the voltage reference entering the controller so the formed
voltage ramps linearly while the RMS feedback tracks the ramp.
"""

import math
from dataclasses import dataclass, field

from .. import _kernels as K

W0_DEFAULT = 2.0 * math.pi * 50.0


@dataclass
class GfmBessParams:
    s_rated_mva: float = 112.0
    p_rated_mw: float = 50.0
    q_rated_mvar: float = 100.0
    v_rated_kv: float = 33.0
    filter_l_pu: float = 0.1
    filter_r_pu: float = 0.025
    tx_r_pu: float = 0.004
    tx_x_pu: float = 0.1
    tx_hv_kv: float = 220.0
    k_v: float = 10.0
    k_p: float = 0.05
    w0: float = W0_DEFAULT
    v_ref_pu: float = 1.0
    # Low-pass on the k_v error path. Must attenuate the first export-cable
    # resonance (~65 Hz, lightly damped): 5 rad/s keeps the RMS loop gain there
    # below 0.5 while the voltage still settles in well under a second.
    error_filter_rad_s: float = 5.0
    # Slow filter on the droop's power input: energisation surges then nudge
    # rather than slew the island frequency (acts like an inertia constant).
    droop_p_filter_s: float = 0.3
    # Island-level frequency restoration: integrates the droop reference until
    # the formed frequency returns to nominal (0 keeps the bare droop law).
    f_trim_mw_per_hz_s: float = 0.0
    i_limit_pu: float = 0.0            # 0 disables the optional current limiter

    def __post_init__(self):
        if not 0.0 < self.k_p < 1.0:
            raise ValueError(f"k_p must be in (0, 1), got {self.k_p}")
        for f in ("s_rated_mva", "p_rated_mw", "q_rated_mvar", "v_rated_kv"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be > 0")

    def error_filter_alpha(self, dt: float) -> float:
        return 1.0 - math.exp(-self.error_filter_rad_s * dt)


@dataclass
class GfmBessState:
    theta: float = 0.0
    omega: float = W0_DEFAULT
    v_d: float = 0.0
    v_q: float = 0.0               # held at zero by construction
    error_filter_state: float = 0.0
    p_meas_mw: float = 0.0
    p_filt_mw: float = 0.0         # droop-path filtered power
    p_ref_mw: float = 0.0
    p_trim_mw: float = 0.0         # frequency-restoration reference shift
    soft_charge_scale: float = 0.0

    def copy(self):
        return GfmBessState(
            self.theta, self.omega, self.v_d, self.v_q, self.error_filter_state,
            self.p_meas_mw, self.p_filt_mw, self.p_ref_mw, self.p_trim_mw,
            self.soft_charge_scale,
        )


def soft_charge_reference(t: float, ramp_start_s: float = 0.0,
                          ramp_end_s: float = 0.5) -> float:
    """Linear 0 -> 1 pu voltage-reference ramp; 1 beyond the ramp end."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if ramp_end_s <= ramp_start_s:
        return 1.0
    return min(max((t - ramp_start_s) / (ramp_end_s - ramp_start_s), 0.0), 1.0)


def gfm_controller_step(v_rms_220_pu: float, p_meas_mw: float,
                        state: GfmBessState, params: GfmBessParams, dt: float):
    """One controller update. Returns (new_state, v_abc_command_pu).

    ``state.soft_charge_scale`` is applied to the voltage reference; the caller
    advances it via ``soft_charge_reference``.
    """
    s = state.copy()
    s.p_meas_mw = p_meas_mw

    v_ref = s.soft_charge_scale * params.v_ref_pu
    alpha = params.error_filter_alpha(dt)
    s.error_filter_state += alpha * (
        params.k_v * (v_ref - v_rms_220_pu) - s.error_filter_state
    )
    s.v_d = v_ref + s.error_filter_state
    s.v_q = 0.0

    a_p = 1.0 - math.exp(-dt / params.droop_p_filter_s)
    s.p_filt_mw += a_p * (p_meas_mw - s.p_filt_mw)
    if params.f_trim_mw_per_hz_s > 0.0:
        s.p_trim_mw += (
            params.f_trim_mw_per_hz_s * (params.w0 - state.omega) / (2.0 * math.pi) * dt
        )
        s.p_trim_mw = min(max(s.p_trim_mw, -40.0), 40.0)
    s.omega = params.w0 * (
        1.0 + params.k_p * (s.p_ref_mw + s.p_trim_mw - s.p_filt_mw) / params.p_rated_mw
    )
    s.theta = K._wrap_2pi(state.theta + s.omega * dt)

    v_abc = K._inverse_park(s.v_d, 0.0, s.theta)
    return s, list(v_abc)
