"""Fixed-step transient run: segments between topology events, converter
callbacks once per step, decimated channel recording.

The engine compiles converter placements into flat kernel arrays, then drives
either the numba or the numpy segment kernel. State advances strictly
sequentially; every run owns its arrays, so independent runs may execute in
parallel processes or threads.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as K
from ..backend import resolve_backend
from ..errors import CircuitError, SolverDivergedError
from ..converters.gfl import GflWtParams
from ..converters.gfm import GfmBessParams
from .assemble import CompiledSystem, assemble_system
from .network import Network
from .timeseries import TimeSeries

_NEVER = 2**62


@dataclass
class BessPlacement:
    params: GfmBessParams
    source: str                 # ControlledVoltageSource element name
    meas_node: str              # RMS regulation bus (POC)
    power_node: str             # voltage reference point of the p/q measurement
    filter_branch: str          # branch carrying the converter current
    ramp: tuple = (0.0, 0.5)    # soft-charge window; end <= start disables
    p_ref_knots: tuple = ((0.0, 0.0),)  # (t_s, MW), linear between knots
    preload_rms: bool = False   # arm the RMS window at reference (full-scale starts)


@dataclass
class WtPlacement:
    name: str
    params: GflWtParams
    source: str                 # ControlledVoltageSource element name (converter EMF)
    terminal_node: str          # LV bus behind the filter (PLL / p-q measurement)
    filter_branch: str          # in-network filter inductor branch
    pll_start_s: float = math.inf
    inj_start_s: float = math.inf


@dataclass
class ExtSourcePlacement:
    """Fixed-frequency ideal source driving a ControlledVoltageSource element."""

    source: str
    v_pu: float = 1.0
    f_hz: float = 50.0
    phase0_rad: float = 0.0


@dataclass
class ConverterSet:
    bess: BessPlacement | None = None
    wts: list = field(default_factory=list)
    v_reg_node: str | None = None   # shared WT voltage-regulation bus
    ext_sources: list = field(default_factory=list)


@dataclass
class SyncSpec:
    island_node: str
    grid_node: str
    tie_breaker: str
    max_df_hz: float = 0.1
    max_dv_pu: float = 0.05
    max_dtheta_deg: float = 10.0
    dwell_s: float = 0.2
    arm_time_s: float = math.inf


@dataclass
class Monitors:
    nodes: list = field(default_factory=list)
    branches: list = field(default_factory=list)
    # envelope entries: (label, kind, ref, base) with kind in
    # {"node_v", "branch_i", "branch_flux"}; base None -> node peak base
    envelopes: list = field(default_factory=list)


@dataclass
class RunResult:
    ts: TimeSeries
    events: list
    status: str = "ok"
    sync_closed_at: float | None = None
    wt_clamp_counts: dict = field(default_factory=dict)
    backend: str = ""

    def channel(self, name):
        return self.ts.channel(name)


def _steps_for(duration, dt):
    n = round(duration / dt)
    if n <= 0 or abs(n * dt - duration) > 1e-9 * max(1.0, duration):
        raise CircuitError(f"duration {duration} is not a positive multiple of dt {dt}")
    return n


def _snap_step(t, dt):
    return int(round(t / dt))


class _Run:
    """One compiled run: arrays, channel layout, segment loop."""

    def __init__(self, system: CompiledSystem, breaker_events, duration, dt,
                 converters, sync, monitors, decimation):
        self.system = system
        self.dt = dt
        self.n_steps = _steps_for(duration, dt)
        self.decim = max(1, int(decimation))
        self.conv = converters or ConverterSet()
        self.sync_spec = sync
        self.mon = monitors or Monitors()
        self.window = max(2, round(1.0 / (50.0 * dt)))
        self.events = sorted(
            ((_snap_step(t, dt), name, closed) for t, name, closed in breaker_events),
            key=lambda e: e[0],
        )
        self._build_bank()
        self._build_bess()
        self._build_wts()
        self._build_ext()
        self._build_sync()
        self._build_channels()

    # -- kernel bundle construction -----------------------------------------

    def _node(self, name):
        return self.system._node_idx(name)

    def _vhat(self, name):
        return self.system.node_peak_base(name)

    def _build_bank(self):
        sysm = self.system
        bess = self.conv.bess
        reg = self.conv.v_reg_node
        n0 = self._node(bess.meas_node) if bess else 0
        h0 = self._vhat(bess.meas_node) if bess else 1.0
        n1 = self._node(reg) if reg else 0
        h1 = self._vhat(reg) if reg else 1.0
        w = self.window
        self.bank = K.RmsBank(
            nodes=np.array([n0, n1], dtype=np.int64),
            vhat=np.array([h0, h1]),
            buf=np.zeros((2, w)),
            pos=np.zeros(2, dtype=np.int64),
            total=np.zeros(2),
            value=np.zeros(2),
            count=np.zeros(2, dtype=np.int64),
        )
        if bess and bess.preload_rms:
            ms = 1.5 * h0 * h0
            self.bank.buf[0, :] = ms
            self.bank.total[0] = ms * w
            self.bank.count[0] = w
            self.bank.value[0] = 1.0

    def _build_bess(self):
        b = self.conv.bess
        w = self.window
        params = np.zeros(K.N_BP)
        state = np.zeros(K.N_BS)
        idx = np.zeros(4, dtype=np.int64)
        pref_t = np.zeros(1)
        pref_w = np.zeros(1)
        present = np.zeros(1, dtype=np.int64)
        if b is not None:
            p = b.params
            node_src, gsrc = self.system.vsource_nodes[b.source]
            params[K.BP_W0] = p.w0
            params[K.BP_KV] = p.k_v
            params[K.BP_KP] = p.k_p
            params[K.BP_PRATED] = p.p_rated_mw * 1e6
            params[K.BP_VREF] = p.v_ref_pu
            params[K.BP_LP_ALPHA] = p.error_filter_alpha(self.dt)
            params[K.BP_GSRC] = gsrc
            params[K.BP_VHAT_SRC] = self._vhat(self.system.node_order[node_src])
            params[K.BP_RAMP_T0] = b.ramp[0]
            params[K.BP_RAMP_T1] = b.ramp[1]
            params[K.BP_ILIM] = p.i_limit_pu
            params[K.BP_DROOP_ALPHA] = 1.0 - math.exp(-self.dt / p.droop_p_filter_s)
            params[K.BP_TRIM_K] = p.f_trim_mw_per_hz_s * 1e6
            params[K.BP_TRIM_MAX] = 40e6
            params[K.BP_DROOP_ALPHA_GRID] = 1.0
            params[K.BP_IHAT] = (
                math.sqrt(2.0 / 3.0) * p.s_rated_mva * 1e6 / (p.v_rated_kv * 1e3)
            )
            idx[K.BI_NODE_SRC] = node_src
            idx[K.BI_NODE_PMEAS] = self._node(b.power_node)
            idx[K.BI_BR_FILTER] = self.system.branch_index[b.filter_branch]
            idx[K.BI_RMS_TRACKER] = 0
            knots = sorted(b.p_ref_knots)
            pref_t = np.array([k[0] for k in knots])
            pref_w = np.array([k[1] * 1e6 for k in knots])
            state[K.BS_OMEGA] = p.w0
            state[K.BS_WTARGET] = p.w0
            present[0] = 1
        self.bess = K.BessArrays(
            present=present, params=params, state=state, idx=idx,
            pq_buf=np.zeros((2, w)), pq_pos=np.zeros(2, dtype=np.int64),
            pq_sum=np.zeros(2), pref_t=pref_t, pref_w=pref_w,
        )

    def _build_wts(self):
        wts = self.conv.wts
        nwt = len(wts)
        w = self.window
        params = np.zeros(K.N_WP)
        state = np.zeros((nwt, K.N_WS))
        node_lv = np.zeros(nwt, dtype=np.int64)
        node_cv = np.zeros(nwt, dtype=np.int64)
        gsrc = np.zeros(nwt)
        br_filter = np.zeros(nwt, dtype=np.int64)
        pll_start = np.full(nwt, _NEVER, dtype=np.int64)
        inj_start = np.full(nwt, _NEVER, dtype=np.int64)
        if nwt:
            p = wts[0].params  # one shared parameter set per case
            zb = (p.lv_kv * 1e3) ** 2 / (p.s_rated_mva * 1e6)
            params[K.WP_W0] = p.w0
            params[K.WP_KP_PLL] = p.pll.k_p
            params[K.WP_KI_PLL] = p.pll.k_i
            params[K.WP_ALPHA_PRE] = p.pll.prefilter_alpha(self.dt)
            params[K.WP_DROOP_F] = p.f_droop
            params[K.WP_DROOP_V] = p.v_droop
            params[K.WP_KP_V] = p.v_k_p
            params[K.WP_KI_V] = p.v_k_i
            params[K.WP_KP_AC] = p.ac_v_k_p
            params[K.WP_KP_CC] = p.cc_k_p
            params[K.WP_KI_CC] = p.cc_k_i
            params[K.WP_R_PU] = p.filter_r_pu
            params[K.WP_L_PU] = p.filter_l_pu
            params[K.WP_L_SI] = p.filter_l_pu * zb / p.w0
            params[K.WP_R_SI] = p.filter_r_pu * zb
            params[K.WP_P_SCALE] = p.power_factor
            params[K.WP_VREF66] = p.v_ref_pu
            params[K.WP_VC_MAX] = p.vc_max_pu
            params[K.WP_W_LO] = p.pll.w_min
            params[K.WP_W_HI] = p.pll.w_max
            params[K.WP_INTEG_CLAMP] = 1.5
            params[K.WP_PREF_BASE] = p.p_ref_base_pu
            params[K.WP_ALPHA_FF] = p.ff_alpha(self.dt)
            params[K.WP_KP_BOOT] = p.boot_k_p
            params[K.WP_VHAT_LV] = math.sqrt(2.0 / 3.0) * p.lv_kv * 1e3
            params[K.WP_IHAT_LV] = (
                math.sqrt(2.0 / 3.0) * p.s_rated_mva * 1e6 / (p.lv_kv * 1e3)
            )
            for i, wt in enumerate(wts):
                node_lv[i] = self._node(wt.terminal_node)
                node_cv[i], gsrc[i] = self.system.vsource_nodes[wt.source]
                br_filter[i] = self.system.branch_index[wt.filter_branch]
                if math.isfinite(wt.pll_start_s):
                    pll_start[i] = _snap_step(wt.pll_start_s, self.dt)
                if math.isfinite(wt.inj_start_s):
                    inj_start[i] = _snap_step(wt.inj_start_s, self.dt)
                state[i, K.WS_OMEGA] = p.w0
        self.wt = K.WtArrays(
            n=nwt, params=params, state=state, node_lv=node_lv, node_cv=node_cv,
            gsrc=gsrc, br_filter=br_filter,
            pll_start=pll_start, inj_start=inj_start,
            pq_buf=np.zeros((max(1, 2 * nwt), w)),
            pq_pos=np.zeros(max(1, 2 * nwt), dtype=np.int64),
            pq_sum=np.zeros(max(1, 2 * nwt)),
        )

    def _build_ext(self):
        srcs = self.conv.ext_sources
        node = np.zeros(len(srcs), dtype=np.int64)
        gsrc = np.zeros(len(srcs))
        vhat = np.zeros(len(srcs))
        w = np.zeros(len(srcs))
        phase0 = np.zeros(len(srcs))
        for i, s in enumerate(srcs):
            n, g = self.system.vsource_nodes[s.source]
            node[i] = n
            gsrc[i] = g
            vhat[i] = s.v_pu * self._vhat(self.system.node_order[n])
            w[i] = 2.0 * math.pi * s.f_hz
            phase0[i] = s.phase0_rad
        self.ext = K.ExtSrcArrays(node=node, gsrc=gsrc, vhat=vhat, w=w, phase0=phase0)

    def _build_sync(self):
        s = self.sync_spec
        w = self.window
        armed = np.array([-1], dtype=np.int64)
        nodes = np.zeros(2, dtype=np.int64)
        vhat = np.ones(2)
        limits = np.zeros(4)
        if s is not None and math.isfinite(s.arm_time_s):
            armed[0] = _snap_step(s.arm_time_s, self.dt)
            nodes[0] = self._node(s.island_node)
            nodes[1] = self._node(s.grid_node)
            vhat[0] = self._vhat(s.island_node)
            vhat[1] = self._vhat(s.grid_node)
            limits[K.SL_MAX_DF] = s.max_df_hz
            limits[K.SL_MAX_DV] = s.max_dv_pu
            limits[K.SL_MAX_DTH] = math.radians(s.max_dtheta_deg)
            limits[K.SL_DWELL_STEPS] = max(1, round(s.dwell_s / self.dt))
        self.sync = K.SyncArrays(
            armed_step=armed, nodes=nodes, vhat=vhat,
            bufc=np.zeros((2, w)), bufs=np.zeros((2, w)),
            sums=np.zeros((2, 2)), pos=np.zeros(1, dtype=np.int64),
            count=np.zeros(3, dtype=np.int64), state=np.zeros(K.N_SS),
            limits=limits,
        )

    def _build_channels(self):
        sysm = self.system
        names = ["time"]
        units = ["s"]
        for node in self.mon.nodes:
            for ph in "abc":
                names.append(f"v_{node}_{ph}")
                units.append("kV")
        for br in self.mon.branches:
            for ph in "abc":
                names.append(f"i_{br}_{ph}")
                units.append("A")
        cols = np.zeros(4, dtype=np.int64)
        cols[K.COL_BESS] = len(names)
        if self.conv.bess is not None:
            for nm, un in (
                ("bess_f", "Hz"), ("bess_v_d", "pu"), ("bess_v_rms", "pu"),
                ("bess_p", "MW"), ("bess_q", "Mvar"), ("bess_p_ref", "MW"),
                ("bess_scale", "pu"), ("bess_i", "pu"),
            ):
                names.append(nm)
                units.append(un)
        cols[K.COL_WT] = len(names)
        for wt in self.conv.wts:
            for nm, un in (
                ("f", "Hz"), ("p", "MW"), ("q", "Mvar"),
                ("id_ref", "pu"), ("iq_ref", "pu"),
            ):
                names.append(f"{wt.name}_{nm}")
                units.append(un)
        cols[K.COL_ENV] = len(names)
        env_kind = []
        env_idx = []
        env_scale = []
        for label, kind, ref, base in self.mon.envelopes:
            names.append(f"env_{label}")
            units.append("pu")
            if kind == "node_v":
                env_kind.append(K.ENV_NODE_V)
                env_idx.append(self._node(ref))
                env_scale.append(1.0 / (base if base else self._vhat(ref)))
            elif kind == "branch_i":
                env_kind.append(K.ENV_BR_I)
                env_idx.append(sysm.branch_index[ref])
                env_scale.append(1.0 / base)
            elif kind == "branch_flux":
                env_kind.append(K.ENV_BR_AUX)
                env_idx.append(sysm.branch_index[ref])
                env_scale.append(1.0 / base)
            else:
                raise CircuitError(f"unknown envelope kind {kind!r}")
        cols[K.COL_SYNC] = len(names)
        if self.sync.armed_step[0] >= 0:
            for nm, un in (("sync_dv", "pu"), ("sync_df", "Hz"), ("sync_dtheta", "deg")):
                names.append(nm)
                units.append(un)

        self.names = names
        self.units = units
        nrows = self.n_steps // self.decim + 1
        out = np.zeros((nrows, len(names)))
        self.chan = K.ChanArrays(
            out=out, decim=self.decim,
            mon_nodes=np.array([self._node(n) for n in self.mon.nodes], dtype=np.int64),
            mon_node_scale=np.full(len(self.mon.nodes), 1e-3),
            mon_br=np.array(
                [sysm.branch_index[b] for b in self.mon.branches], dtype=np.int64
            ),
            mon_br_scale=np.ones(len(self.mon.branches)),
            env_kind=np.array(env_kind, dtype=np.int64),
            env_idx=np.array(env_idx, dtype=np.int64),
            env_scale=np.array(env_scale),
            env_acc=np.zeros(len(env_kind)),
            cols=cols,
        )

    # -- execution -----------------------------------------------------------

    def execute(self, backend) -> RunResult:
        if backend == "numba":
            segment = K.run_segment_numba
        else:
            segment = K.run_segment_numpy
        sysm = self.system
        net = sysm.net_arrays()
        dt = self.dt
        sync_closed_at = None
        event_ptr = 0
        events = self.events
        if len(self.ext.node):
            K._ext_src_step(dt, net, self.ext)  # sources live from the first solve
        k = 0
        while k < self.n_steps:
            while event_ptr < len(events) and events[event_ptr][0] <= k:
                step, name, closed = events[event_ptr]
                sysm.set_breaker(name, closed, time_s=step * dt)
                net = sysm.net_arrays()  # ginv was replaced
                event_ptr += 1
            seg_end = self.n_steps
            if event_ptr < len(events):
                seg_end = min(seg_end, events[event_ptr][0])
            while k < seg_end:
                status, k = segment(
                    k, seg_end - k, dt, net, self.bess, self.bank,
                    self.wt, self.ext, self.sync, self.chan,
                )
                if status == K.STATUS_NAN:
                    raise SolverDivergedError(k, k * dt)
                if status == K.STATUS_SYNC_PERMIT:
                    t = k * dt
                    sysm.set_breaker(self.sync_spec.tie_breaker, True, time_s=t)
                    net = sysm.net_arrays()
                    self.sync.count[2] = 1
                    self.bess.state[K.BS_GRID_TIED] = 1.0
                    self.bess.state[K.BS_WBIAS] = 0.0
                    sync_closed_at = t
        sysm.step_count += self.n_steps

        ts = TimeSeries(self.names, self.units, self.chan.out)
        clamps = {
            wt.name: int(self.wt.state[i, K.WS_CLAMPS])
            for i, wt in enumerate(self.conv.wts)
        }
        return RunResult(
            ts=ts, events=list(sysm.event_log), status="ok",
            sync_closed_at=sync_closed_at, wt_clamp_counts=clamps,
        )


def run_transient(network: Network, schedule, duration: float, dt: float,
                  converters: ConverterSet | None = None,
                  sync: SyncSpec | None = None,
                  monitors: Monitors | None = None,
                  decimation: int = 20,
                  backend: str | None = None) -> RunResult:
    """Deterministic fixed-step replay of ``schedule`` (a list of breaker events
    ``(time_s, breaker_name, closed)``) over ``duration`` seconds.

    Identical inputs produce bit-identical outputs on a given backend.
    """
    chosen = resolve_backend(backend)
    system = assemble_system(network, dt)
    run = _Run(system, list(schedule or ()), duration, dt,
               converters, sync, monitors, decimation)
    result = run.execute(chosen)
    result.backend = chosen
    return result
