"""Grid-following WT grid-side converter: SRF PLL, droop-based references and
dq current control realized as a current injection behind its L filter.

Per-unit conventions: voltages on the terminal peak base (1 pu amplitude =
rated), currents on the apparent-power rating ``s_rated``; active-power
references on ``p_rated``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as K
from .pll import PllParams, PllState

W0_DEFAULT = 2.0 * math.pi * 50.0


@dataclass
class GflWtParams:
    p_rated_mw: float = 12.0
    power_factor: float = 0.9
    filter_l_pu: float = 0.1
    filter_r_pu: float = 0.005
    filter_shunt_r_pu: float = 0.003
    filter_shunt_c_pu: float = 0.075
    tx_r_pu: float = 0.0054
    tx_x_pu: float = 0.1
    tx_hv_kv: float = 66.0
    lv_kv: float = 3.3
    pll: PllParams = field(default_factory=PllParams)
    cc_k_p: float = 0.2
    cc_t_i_s: float = 5.0
    f_droop: float = 0.05
    v_droop: float = 0.05
    v_k_p: float = 0.3
    v_t_i_s: float = 0.2
    ac_v_k_p: float = 1e-4
    w0: float = W0_DEFAULT
    v_ref_pu: float = 1.0       # regulation target at the 66 kV bus
    p_ref_base_pu: float = 0.0
    vc_max_pu: float = 1.5      # converter voltage ceiling
    sync_delay_s: float = 0.2   # PLL settle time before injection unblocks
    boot_k_p: float = 2.0       # virtual-resistance gain while synchronising
    # low-pass on the dq feedforward/decoupling measurements; DC-exact, keeps
    # the voltage command from re-exciting the filter/leakage resonance
    ff_rad_s: float = 150.0

    def ff_alpha(self, dt: float) -> float:
        return 1.0 - math.exp(-self.ff_rad_s * dt)

    def __post_init__(self):
        if not 0.0 < self.v_droop < 1.0:
            raise ValueError(f"v_droop must be in (0, 1), got {self.v_droop}")
        for f in ("p_rated_mw", "power_factor", "cc_k_p", "cc_t_i_s", "v_k_p", "v_t_i_s"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be > 0")

    @property
    def s_rated_mva(self) -> float:
        return self.p_rated_mw / self.power_factor

    @property
    def cc_k_i(self) -> float:
        return self.cc_k_p / self.cc_t_i_s

    @property
    def v_k_i(self) -> float:
        return self.v_k_p / self.v_t_i_s


@dataclass
class GflWtState:
    pll: PllState = field(default_factory=PllState)
    i_d_ref: float = 0.0
    i_q_ref: float = 0.0
    ccd_integ: float = 0.0
    ccq_integ: float = 0.0
    iq_droop_integ: float = 0.0
    ff_dq: tuple = (0.0, 0.0)     # filtered terminal-voltage feedforward
    fi_dq: tuple = (0.0, 0.0)     # filtered current for decoupling
    i_f_abc: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dc_link_ref_pu: float = 1.0   # placeholder; held at 1 pu
    enabled: bool = False
    enable_time_s: float = 0.0
    boot_elapsed_s: float = 0.0   # synchronising time since enable
    clamp_events: int = 0

    def copy(self):
        return GflWtState(
            self.pll.copy(), self.i_d_ref, self.i_q_ref, self.ccd_integ,
            self.ccq_integ, self.iq_droop_integ, self.ff_dq, self.fi_dq,
            self.i_f_abc.copy(), self.dc_link_ref_pu, self.enabled,
            self.enable_time_s, self.boot_elapsed_s, self.clamp_events,
        )


def wt_reactive_reference(v_meas_pu: float, v_ref_pu: float = 1.0,
                          droop: float = 0.05) -> float:
    """Steady-state reactive-support current target (positive = raise voltage).
    Clamping to the rating circle happens jointly with i_d in the converter."""
    return (v_ref_pu - v_meas_pu) / droop


def wt_frequency_droop(omega_hat: float, p_ref_base_pu: float = 0.0,
                       droop: float = 0.05, w0: float = W0_DEFAULT) -> float:
    """Active-power reference (pu of rated power) from the 5% frequency droop,
    clamped to [0, 1]."""
    p_ref = p_ref_base_pu - (omega_hat / w0 - 1.0) / droop
    return min(max(p_ref, 0.0), 1.0)


def gfl_wt_step(v_abc_pu, state: GflWtState, params: GflWtParams, dt: float,
                v_reg_rms_pu: float | None = None):
    """One converter update on per-unit terminal voltages.

    Returns (new_state, injected_phase_currents_pu). A disabled WT injects
    zero and holds its states at rest.
    """
    s = state.copy()
    if not s.enabled:
        s.i_f_abc[:] = 0.0
        return s, np.zeros(3)

    va, vb, vc = (float(x) for x in v_abc_pu)
    p = params
    if v_reg_rms_pu is None:
        v_reg_rms_pu = math.sqrt((2.0 / 3.0) * (va * va + vb * vb + vc * vc))

    theta_meas = s.pll.theta
    v_d, v_q = K._park(va, vb, vc, theta_meas)
    theta, omega, integ, vqf = K._pll_step(
        v_q, dt, theta_meas, s.pll.integrator, s.pll.prefilter_state,
        p.pll.prefilter_alpha(dt), p.pll.k_p, p.pll.k_i,
        p.pll.w0, p.pll.w_min, p.pll.w_max,
    )
    s.pll = PllState(theta, omega, integ, vqf)

    booting = s.boot_elapsed_s < p.sync_delay_s
    if booting:
        s.boot_elapsed_s += dt
        id_ref = 0.0
        iq_cmd = 0.0
    else:
        p_ref = wt_frequency_droop(omega, p.p_ref_base_pu, p.f_droop, p.w0)
        id_ref = p_ref * p.power_factor / max(v_d, 0.2)

        e_v = p.v_ref_pu - v_reg_rms_pu
        iq_static = wt_reactive_reference(v_reg_rms_pu, p.v_ref_pu, p.v_droop)
        iq_sup = (p.v_k_p * iq_static + s.iq_droop_integ) / (1.0 + p.v_k_p)
        s.iq_droop_integ += p.v_k_i * (iq_static - iq_sup) * dt
        s.iq_droop_integ = min(max(s.iq_droop_integ, -1.5), 1.5)
        iq_sup += p.ac_v_k_p * e_v
        iq_cmd = -iq_sup  # +support (capacitive) maps to negative q-axis current

        mag = math.hypot(id_ref, iq_cmd)
        if mag > 1.0:
            id_ref /= mag
            iq_cmd /= mag
            s.clamp_events += 1
    s.i_d_ref = id_ref
    s.i_q_ref = iq_cmd

    i_d, i_q = K._park(s.i_f_abc[0], s.i_f_abc[1], s.i_f_abc[2], theta_meas)
    e_d = id_ref - i_d
    e_q = iq_cmd - i_q
    if booting:
        # stiff null-current P loop while synchronising (no integrator charge)
        u_d = p.boot_k_p * e_d
        u_q = p.boot_k_p * e_q
    else:
        s.ccd_integ += p.cc_k_i * e_d * dt
        s.ccq_integ += p.cc_k_i * e_q * dt
        u_d = p.cc_k_p * e_d + s.ccd_integ
        u_q = p.cc_k_p * e_q + s.ccq_integ

    aff = p.ff_alpha(dt)
    ffd = s.ff_dq[0] + aff * (v_d - s.ff_dq[0])
    ffq = s.ff_dq[1] + aff * (v_q - s.ff_dq[1])
    fid = s.fi_dq[0] + aff * (i_d - s.fi_dq[0])
    fiq = s.fi_dq[1] + aff * (i_q - s.fi_dq[1])
    s.ff_dq = (ffd, ffq)
    s.fi_dq = (fid, fiq)

    wrel = omega / p.w0
    vc_d = ffd + p.filter_r_pu * fid - p.filter_l_pu * wrel * fiq + u_d
    vc_q = ffq + p.filter_r_pu * fiq + p.filter_l_pu * wrel * fid + u_q
    vmag = math.hypot(vc_d, vc_q)
    if vmag > p.vc_max_pu:
        k = p.vc_max_pu / vmag
        vc_d *= k
        vc_q *= k

    ea, eb, ec = K._inverse_park(vc_d, vc_q, theta_meas)
    coef = dt * p.w0 / p.filter_l_pu
    r = p.filter_r_pu
    s.i_f_abc[0] += coef * (ea - va - r * s.i_f_abc[0])
    s.i_f_abc[1] += coef * (eb - vb - r * s.i_f_abc[1])
    s.i_f_abc[2] += coef * (ec - vc - r * s.i_f_abc[2])
    return s, s.i_f_abc.copy()
