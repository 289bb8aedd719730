"""Hot per-step math for the fixed-step solver and converter controllers.

Two circuit-substep implementations share the surrounding controller code:

* ``_circuit_substep_loops``: explicit loops, compiled by numba inside the
  jitted segment driver.
* ``_circuit_substep_numpy``: vectorized over per-kind branch slices, used by
  the pure-numpy segment driver.

Controller steps, measurement trackers and the post-step bookkeeping are
single-source scalar/array functions decorated with ``maybe_njit`` so both
drivers execute identical math.

All mutable state lives in plain float64/int64 arrays grouped into namedtuples
(see ``engine`` for construction). Branch tables are sorted by kind so each
kind occupies a contiguous slice ``off[k]:off[k+1]``.
"""

import math
from collections import namedtuple

import numpy as np

from .backend import JIT_ENABLED, maybe_njit

if JIT_ENABLED:
    import numba

TWO_PI = 2.0 * math.pi
TWO_THIRDS_PI = 2.0 * math.pi / 3.0

# branch kinds (sort order of the compiled tables)
KIND_RES = 0   # static conductance; no state
KIND_RL = 1    # series R-L; state: branch current
KIND_RC = 2    # series R-C; state: branch current + capacitor voltage (aux)
KIND_XFMR = 3  # leakage R-L behind ideal ratio; state: LV-side current
KIND_MAG = 4   # magnetizing inductance w/ optional saturation; aux: flux linkage
N_KINDS = 5

# segment return status
STATUS_DONE = 0
STATUS_NAN = 1
STATUS_SYNC_PERMIT = 2

NetArrays = namedtuple(
    "NetArrays",
    "ginv off na nb g p1 ratio satflux satcur satnk satslope satidx "
    "v ibr aux inj rhs vnew vbr0 hbr",
)

BessArrays = namedtuple(
    "BessArrays",
    "present params state idx pq_buf pq_pos pq_sum pref_t pref_w",
)

WtArrays = namedtuple(
    "WtArrays",
    "n params state node_lv node_cv gsrc br_filter pll_start inj_start "
    "pq_buf pq_pos pq_sum",
)

# fixed-frequency ideal sources (external grid, stiff test buses)
ExtSrcArrays = namedtuple("ExtSrcArrays", "node gsrc vhat w phase0")

RmsBank = namedtuple("RmsBank", "nodes vhat buf pos total value count")

SyncArrays = namedtuple(
    "SyncArrays",
    "armed_step nodes vhat bufc bufs sums pos count state limits",
)

ChanArrays = namedtuple(
    "ChanArrays",
    "out decim mon_nodes mon_node_scale mon_br mon_br_scale "
    "env_kind env_idx env_scale env_acc cols",
)

# BESS params slots
BP_W0 = 0
BP_KV = 1
BP_KP = 2
BP_PRATED = 3
BP_VREF = 4
BP_LP_ALPHA = 5
BP_GSRC = 6
BP_VHAT_SRC = 7
BP_RAMP_T0 = 8
BP_RAMP_T1 = 9
BP_ILIM = 10
BP_IHAT = 11
BP_RMS_PRELOAD = 12
BP_DROOP_ALPHA = 13
BP_TRIM_K = 14      # W per (Hz * s); 0 disables the frequency-restoring trim
BP_TRIM_MAX = 15
BP_DROOP_ALPHA_GRID = 16   # faster droop-power filter once grid-connected
N_BP = 17

# BESS state slots
BS_THETA = 0
BS_OMEGA = 1
BS_LP = 2
BS_VD = 3
BS_VRMS = 4
BS_PMEAS = 5
BS_QMEAS = 6
BS_PREF = 7
BS_SCALE = 8
BS_IPU = 9
BS_PFILT = 10
BS_TRIM = 11
BS_WTARGET = 12   # trim target frequency
BS_GRID_TIED = 13  # nonzero once the tie breaker has closed
BS_WBIAS = 14      # additive angle-slew bias while the synchrocheck is armed
N_BS = 15

# BESS idx slots
BI_NODE_SRC = 0
BI_NODE_PMEAS = 1
BI_BR_FILTER = 2
BI_RMS_TRACKER = 3

# WT params slots
WP_W0 = 0
WP_KP_PLL = 1
WP_KI_PLL = 2
WP_ALPHA_PRE = 3
WP_DROOP_F = 4
WP_DROOP_V = 5
WP_KP_V = 6
WP_KI_V = 7
WP_KP_AC = 8
WP_KP_CC = 9
WP_KI_CC = 10
WP_R_PU = 11
WP_L_PU = 12
WP_VHAT_LV = 13
WP_IHAT_LV = 14
WP_L_SI = 15
WP_R_SI = 16
WP_P_SCALE = 17
WP_VREF66 = 18
WP_VC_MAX = 19
WP_W_LO = 20
WP_W_HI = 21
WP_INTEG_CLAMP = 22
WP_PREF_BASE = 23
WP_ALPHA_FF = 24
WP_KP_BOOT = 25     # high virtual-resistance P gain while synchronising
N_WP = 26

# WT state slots
WS_THETA = 0
WS_OMEGA = 1
WS_PLL_INTEG = 2
WS_VQF = 3
WS_IQ_INTEG = 4
WS_CCD_INTEG = 5
WS_CCQ_INTEG = 6
WS_FFD = 7    # filtered v_d feedforward
WS_FFQ = 8
WS_FID = 9    # filtered i_d for decoupling
WS_FIQ = 10
WS_PMEAS = 11
WS_QMEAS = 12
WS_IDREF = 13
WS_IQREF = 14
WS_CLAMPS = 15
N_WS = 16

# sync limits slots
SL_MAX_DF = 0
SL_MAX_DV = 1
SL_MAX_DTH = 2
SL_DWELL_STEPS = 3
# sync state slots
SS_DTH_PREV = 0
SS_SLIP_LP = 1
SS_DV = 2
SS_DF = 3
SS_DTH = 4
N_SS = 5

# channel column offsets inside ChanArrays.cols
COL_BESS = 0
COL_WT = 1
COL_ENV = 2
COL_SYNC = 3

ENV_NODE_V = 0
ENV_BR_I = 1
ENV_BR_AUX = 2


# ---------------------------------------------------------------------------
# shared scalar helpers
# ---------------------------------------------------------------------------

def _sat_current(lam, flux, cur, nk, slope):
    """Piecewise-linear magnetizing current, odd-symmetric, air-core beyond."""
    a = abs(lam)
    last = nk - 1
    if a >= flux[last]:
        i = cur[last] + (a - flux[last]) * slope
    else:
        j = 1
        while flux[j] < a:
            j += 1
        f0 = flux[j - 1]
        i = cur[j - 1] + (a - f0) * (cur[j] - cur[j - 1]) / (flux[j] - f0)
    return i if lam >= 0.0 else -i


def _park(va, vb, vc, theta):
    """Amplitude-invariant Park transform of one 3-phase sample."""
    ca = math.cos(theta)
    cb = math.cos(theta - TWO_THIRDS_PI)
    cc = math.cos(theta + TWO_THIRDS_PI)
    sa = math.sin(theta)
    sb = math.sin(theta - TWO_THIRDS_PI)
    sc = math.sin(theta + TWO_THIRDS_PI)
    d = (2.0 / 3.0) * (va * ca + vb * cb + vc * cc)
    q = -(2.0 / 3.0) * (va * sa + vb * sb + vc * sc)
    return d, q


def _inverse_park(d, q, theta):
    ca = math.cos(theta)
    cb = math.cos(theta - TWO_THIRDS_PI)
    cc = math.cos(theta + TWO_THIRDS_PI)
    sa = math.sin(theta)
    sb = math.sin(theta - TWO_THIRDS_PI)
    sc = math.sin(theta + TWO_THIRDS_PI)
    return (d * ca - q * sa, d * cb - q * sb, d * cc - q * sc)


def _wrap_2pi(theta):
    if theta >= TWO_PI:
        theta -= TWO_PI
    elif theta < 0.0:
        theta += TWO_PI
    return theta


def _pll_step(vq_pu, dt, theta, integ, vqf, alpha_pre, kp, ki, w0, w_lo, w_hi):
    """One SRF-PLL update. Returns (theta, omega, integ, vqf)."""
    vqf += alpha_pre * (vq_pu - vqf)
    integ += ki * vqf * dt
    if integ > 0.2:
        integ = 0.2
    elif integ < -0.2:
        integ = -0.2
    omega = w0 * (1.0 + kp * vqf + integ)
    if omega < w_lo:
        omega = w_lo
    elif omega > w_hi:
        omega = w_hi
    theta = _wrap_2pi(theta + omega * dt)
    return theta, omega, integ, vqf


def _instant_q(va, vb, vc, ia, ib, ic):
    """Instantaneous reactive power (3-wire construction)."""
    return ((vb - vc) * ia + (vc - va) * ib + (va - vb) * ic) / math.sqrt(3.0)


# ---------------------------------------------------------------------------
# circuit substep: loop implementation (jitted inside the numba driver)
# ---------------------------------------------------------------------------

def _circuit_substep_loops(net):
    """Advance the network one step. Returns STATUS_NAN on divergence."""
    n = net.ginv.shape[0]
    off = net.off
    rhs = net.rhs
    v = net.v
    for i in range(n):
        for ph in range(3):
            rhs[i, ph] = net.inj[i, ph]

    # histories (RES carries none)
    for b in range(off[KIND_RL], off[KIND_RC + 1]):  # RL and RC share the h form
        na = net.na[b]
        nb = net.nb[b]
        g = net.g[b]
        p1 = net.p1[b]
        is_rc = b >= off[KIND_RC]
        for ph in range(3):
            v0 = v[na, ph] - v[nb, ph]
            net.vbr0[b, ph] = v0
            if is_rc:
                h = -g * (net.aux[b, ph] + p1 * net.ibr[b, ph])
            else:
                h = p1 * net.ibr[b, ph] + g * v0
            net.hbr[b, ph] = h
            if na < n:
                rhs[na, ph] -= h
            if nb < n:
                rhs[nb, ph] += h

    for b in range(off[KIND_XFMR], off[KIND_XFMR + 1]):
        na = net.na[b]
        nb = net.nb[b]
        g = net.g[b]
        p1 = net.p1[b]
        r = net.ratio[b]
        for ph in range(3):
            v0 = v[na, ph] / r - v[nb, ph]
            net.vbr0[b, ph] = v0
            h = p1 * net.ibr[b, ph] + g * v0
            net.hbr[b, ph] = h
            if na < n:
                rhs[na, ph] -= h / r
            if nb < n:
                rhs[nb, ph] += h

    for b in range(off[KIND_MAG], off[KIND_MAG + 1]):
        na = net.na[b]
        nb = net.nb[b]
        g = net.g[b]
        si = net.satidx[b]
        for ph in range(3):
            v0 = v[na, ph] - v[nb, ph]
            net.vbr0[b, ph] = v0
            h = _sat_current(
                net.aux[b, ph], net.satflux[si], net.satcur[si],
                net.satnk[si], net.satslope[si],
            ) + g * v0
            net.hbr[b, ph] = h
            if na < n:
                rhs[na, ph] -= h
            if nb < n:
                rhs[nb, ph] += h

    # solve (dense inverse matvec, one RHS column per phase)
    nan_acc = 0.0
    for i in range(n):
        a0 = 0.0
        a1 = 0.0
        a2 = 0.0
        for j in range(n):
            gij = net.ginv[i, j]
            a0 += gij * rhs[j, 0]
            a1 += gij * rhs[j, 1]
            a2 += gij * rhs[j, 2]
        net.vnew[i, 0] = a0
        net.vnew[i, 1] = a1
        net.vnew[i, 2] = a2
        nan_acc += a0 + a1 + a2
    if not (nan_acc == nan_acc):
        return STATUS_NAN

    for i in range(n):
        for ph in range(3):
            v[i, ph] = net.vnew[i, ph]

    # state updates
    for b in range(off[KIND_RES], off[KIND_RES + 1]):
        na = net.na[b]
        nb = net.nb[b]
        g = net.g[b]
        for ph in range(3):
            net.ibr[b, ph] = g * (v[na, ph] - v[nb, ph])

    for b in range(off[KIND_RL], off[KIND_RC + 1]):
        na = net.na[b]
        nb = net.nb[b]
        g = net.g[b]
        p1 = net.p1[b]
        is_rc = b >= off[KIND_RC]
        for ph in range(3):
            v1 = v[na, ph] - v[nb, ph]
            i1 = g * v1 + net.hbr[b, ph]
            if is_rc:
                net.aux[b, ph] += p1 * (net.ibr[b, ph] + i1)
            net.ibr[b, ph] = i1

    for b in range(off[KIND_XFMR], off[KIND_XFMR + 1]):
        na = net.na[b]
        nb = net.nb[b]
        g = net.g[b]
        r = net.ratio[b]
        for ph in range(3):
            v1 = v[na, ph] / r - v[nb, ph]
            net.ibr[b, ph] = g * v1 + net.hbr[b, ph]

    for b in range(off[KIND_MAG], off[KIND_MAG + 1]):
        na = net.na[b]
        nb = net.nb[b]
        g = net.g[b]
        p1 = net.p1[b]
        for ph in range(3):
            v1 = v[na, ph] - v[nb, ph]
            net.aux[b, ph] += p1 * (net.vbr0[b, ph] + v1)
            net.ibr[b, ph] = g * v1 + net.hbr[b, ph]

    return STATUS_DONE


# ---------------------------------------------------------------------------
# circuit substep: vectorized implementation (pure-numpy driver)
# ---------------------------------------------------------------------------

def _circuit_substep_numpy(net):
    n = net.ginv.shape[0]
    off = net.off
    v = net.v
    rhs_ext = np.empty((n + 1, 3))
    rhs_ext[:n] = net.inj
    rhs_ext[n] = 0.0

    s_rl = slice(off[KIND_RL], off[KIND_RL + 1])
    s_rc = slice(off[KIND_RC], off[KIND_RC + 1])
    s_xf = slice(off[KIND_XFMR], off[KIND_XFMR + 1])
    s_mg = slice(off[KIND_MAG], off[KIND_MAG + 1])
    s_res = slice(off[KIND_RES], off[KIND_RES + 1])

    for s, kind in ((s_rl, KIND_RL), (s_rc, KIND_RC), (s_xf, KIND_XFMR), (s_mg, KIND_MAG)):
        if s.start == s.stop:
            continue
        na = net.na[s]
        nb = net.nb[s]
        g = net.g[s, None]
        p1 = net.p1[s, None]
        if kind == KIND_XFMR:
            ratio = net.ratio[s, None]
            v0 = v[na] / ratio - v[nb]
        else:
            v0 = v[na] - v[nb]
        net.vbr0[s] = v0
        if kind == KIND_RC:
            h = -g * (net.aux[s] + p1 * net.ibr[s])
        elif kind == KIND_MAG:
            isat = np.empty_like(v0)
            for row, b in enumerate(range(s.start, s.stop)):
                si = net.satidx[b]
                for ph in range(3):
                    isat[row, ph] = _sat_current(
                        net.aux[b, ph], net.satflux[si], net.satcur[si],
                        net.satnk[si], net.satslope[si],
                    )
            h = isat + g * v0
        else:
            h = p1 * net.ibr[s] + g * v0
        net.hbr[s] = h
        if kind == KIND_XFMR:
            np.add.at(rhs_ext, na, -h / ratio)
        else:
            np.add.at(rhs_ext, na, -h)
        np.add.at(rhs_ext, nb, h)

    np.dot(net.ginv, rhs_ext[:n], out=net.vnew)
    if np.isnan(net.vnew).any():
        return STATUS_NAN
    net.rhs[:] = rhs_ext[:n]
    v[:n] = net.vnew

    if s_res.start != s_res.stop:
        net.ibr[s_res] = net.g[s_res, None] * (v[net.na[s_res]] - v[net.nb[s_res]])
    for s, kind in ((s_rl, KIND_RL), (s_rc, KIND_RC), (s_xf, KIND_XFMR), (s_mg, KIND_MAG)):
        if s.start == s.stop:
            continue
        na = net.na[s]
        nb = net.nb[s]
        g = net.g[s, None]
        p1 = net.p1[s, None]
        if kind == KIND_XFMR:
            v1 = v[na] / net.ratio[s, None] - v[nb]
        else:
            v1 = v[na] - v[nb]
        i1 = g * v1 + net.hbr[s]
        if kind == KIND_RC:
            net.aux[s] += p1 * (net.ibr[s] + i1)
        elif kind == KIND_MAG:
            net.aux[s] += p1 * (net.vbr0[s] + v1)
        net.ibr[s] = i1
    return STATUS_DONE


# ---------------------------------------------------------------------------
# measurement trackers
# ---------------------------------------------------------------------------

def _rms_bank_step(bank, v):
    """Push one sample into every one-cycle RMS tracker and refresh values."""
    ntrk = bank.nodes.shape[0]
    w = bank.buf.shape[1]
    for t in range(ntrk):
        node = bank.nodes[t]
        va = v[node, 0]
        vb = v[node, 1]
        vc = v[node, 2]
        ms = va * va + vb * vb + vc * vc
        pos = bank.pos[t]
        bank.total[t] += ms - bank.buf[t, pos]
        bank.buf[t, pos] = ms
        pos += 1
        if pos == w:
            pos = 0
            # periodic exact recompute kills float drift in the running sum
            acc = 0.0
            for j in range(w):
                acc += bank.buf[t, j]
            bank.total[t] = acc
        bank.pos[t] = pos
        if bank.count[t] < w:
            bank.count[t] += 1
        vhat = bank.vhat[t]
        mean = bank.total[t] / bank.count[t]
        norm = mean / (1.5 * vhat * vhat)
        if norm < 0.0:
            norm = 0.0
        bank.value[t] = math.sqrt(norm)


def _ma_push(buf, pos_arr, sum_arr, slot, x):
    """Moving-average ring push; returns the current mean."""
    w = buf.shape[1]
    pos = pos_arr[slot]
    sum_arr[slot] += x - buf[slot, pos]
    buf[slot, pos] = x
    pos += 1
    if pos == w:
        pos = 0
        acc = 0.0
        for j in range(w):
            acc += buf[slot, j]
        sum_arr[slot] = acc
    pos_arr[slot] = pos
    return sum_arr[slot] / w


# ---------------------------------------------------------------------------
# converter steps
# ---------------------------------------------------------------------------

def _bess_step(t_next, dt, net, bess, bank):
    """GFM battery controller: RMS/power measurement, droop, voltage command."""
    bp = bess.params
    bs = bess.state
    node_src = bess.idx[BI_NODE_SRC]
    node_pm = bess.idx[BI_NODE_PMEAS]
    br = bess.idx[BI_BR_FILTER]

    va = net.v[node_pm, 0]
    vb = net.v[node_pm, 1]
    vc = net.v[node_pm, 2]
    ia = net.ibr[br, 0]
    ib = net.ibr[br, 1]
    ic = net.ibr[br, 2]

    p_inst = va * ia + vb * ib + vc * ic
    q_inst = _instant_q(va, vb, vc, ia, ib, ic)
    bs[BS_PMEAS] = _ma_push(bess.pq_buf, bess.pq_pos, bess.pq_sum, 0, p_inst)
    bs[BS_QMEAS] = _ma_push(bess.pq_buf, bess.pq_pos, bess.pq_sum, 1, q_inst)

    v_rms = bank.value[bess.idx[BI_RMS_TRACKER]]
    bs[BS_VRMS] = v_rms

    t0 = bp[BP_RAMP_T0]
    t1 = bp[BP_RAMP_T1]
    if t1 <= t0:
        scale = 1.0
    else:
        scale = (t_next - t0) / (t1 - t0)
        if scale < 0.0:
            scale = 0.0
        elif scale > 1.0:
            scale = 1.0
    bs[BS_SCALE] = scale

    v_ref = scale * bp[BP_VREF]
    bs[BS_LP] += bp[BP_LP_ALPHA] * (bp[BP_KV] * (v_ref - v_rms) - bs[BS_LP])
    v_d = v_ref + bs[BS_LP]
    bs[BS_VD] = v_d

    p_sched = np.interp(t_next, bess.pref_t, bess.pref_w)
    # droop acts on a slow-filtered power so energisation surges do not slew
    # the island frequency; the reported p stays the one-cycle average.
    # Grid-connected (tie closed) the filter lag would undamp the angle spring
    # against the stiff grid, so a faster constant takes over.
    alpha = bp[BP_DROOP_ALPHA]
    if bs[BS_GRID_TIED] != 0.0:
        alpha = bp[BP_DROOP_ALPHA_GRID]
    bs[BS_PFILT] += alpha * (bs[BS_PMEAS] - bs[BS_PFILT])
    # secondary frequency trim: slowly slides the droop reference until the
    # island returns to nominal frequency (island-regulating level control)
    if bp[BP_TRIM_K] > 0.0 and bs[BS_WBIAS] == 0.0:
        bs[BS_TRIM] += bp[BP_TRIM_K] * (bs[BS_WTARGET] - bs[BS_OMEGA]) / TWO_PI * dt
        tmax = bp[BP_TRIM_MAX]
        if bs[BS_TRIM] > tmax:
            bs[BS_TRIM] = tmax
        elif bs[BS_TRIM] < -tmax:
            bs[BS_TRIM] = -tmax
    p_ref = p_sched + bs[BS_TRIM]
    bs[BS_PREF] = p_ref
    omega = (
        bp[BP_W0] * (1.0 + bp[BP_KP] * (p_ref - bs[BS_PFILT]) / bp[BP_PRATED])
        + bs[BS_WBIAS]
    )
    bs[BS_OMEGA] = omega
    theta = _wrap_2pi(bs[BS_THETA] + omega * dt)
    bs[BS_THETA] = theta

    i_pu = math.sqrt((2.0 / 3.0) * (ia * ia + ib * ib + ic * ic)) / bp[BP_IHAT]
    bs[BS_IPU] = i_pu

    amp = v_d * bp[BP_VHAT_SRC]
    ilim = bp[BP_ILIM]
    if ilim > 0.0 and i_pu > ilim:
        amp *= ilim / i_pu
    ca, cb, cc = _inverse_park(amp, 0.0, theta)
    gsrc = bp[BP_GSRC]
    net.inj[node_src, 0] = gsrc * ca
    net.inj[node_src, 1] = gsrc * cb
    net.inj[node_src, 2] = gsrc * cc


def _wt_step(w, t_next, dt, k_next, net, wt, bank, v66_tracker):
    """Grid-following WT: PLL, droop references, dq current PI commanding the
    converter voltage behind its in-network L filter (Norton source).

    Between breaker close and injection unblock the current references are
    forced to zero so the converter synchronises while actively holding zero
    current (frame-independent, so an unlocked PLL is harmless).
    """
    wp = wt.params
    ws = wt.state[w]
    node = wt.node_lv[w]

    if k_next < wt.pll_start[w]:
        ws[WS_THETA] = _wrap_2pi(ws[WS_THETA] + wp[WP_W0] * dt)
        ws[WS_OMEGA] = wp[WP_W0]
        return

    va = net.v[node, 0]
    vb = net.v[node, 1]
    vc = net.v[node, 2]
    vhat = wp[WP_VHAT_LV]

    theta = ws[WS_THETA]
    v_d, v_q = _park(va, vb, vc, theta)
    v_d /= vhat
    v_q /= vhat

    theta, omega, integ, vqf = _pll_step(
        v_q, dt, theta, ws[WS_PLL_INTEG], ws[WS_VQF],
        wp[WP_ALPHA_PRE], wp[WP_KP_PLL], wp[WP_KI_PLL],
        wp[WP_W0], wp[WP_W_LO], wp[WP_W_HI],
    )
    ws[WS_THETA] = theta
    ws[WS_OMEGA] = omega
    ws[WS_PLL_INTEG] = integ
    ws[WS_VQF] = vqf

    if k_next < wt.inj_start[w]:
        id_ref = 0.0
        iq_cmd = 0.0
    else:
        # active-power reference from frequency droop (pu of rated power)
        p_ref = wp[WP_PREF_BASE] - (omega / wp[WP_W0] - 1.0) / wp[WP_DROOP_F]
        if p_ref < 0.0:
            p_ref = 0.0
        elif p_ref > 1.0:
            p_ref = 1.0
        vd_eff = v_d if v_d > 0.2 else 0.2
        id_ref = p_ref * wp[WP_P_SCALE] / vd_eff

        # reactive support: the voltage PI tracks the static droop law
        # (v_ref - v)/droop in current units; steady state equals the law
        e_v = wp[WP_VREF66] - bank.value[v66_tracker]
        iq_static = e_v / wp[WP_DROOP_V]
        iq_sup = (wp[WP_KP_V] * iq_static + ws[WS_IQ_INTEG]) / (1.0 + wp[WP_KP_V])
        ws[WS_IQ_INTEG] += wp[WP_KI_V] * (iq_static - iq_sup) * dt
        clamp = wp[WP_INTEG_CLAMP]
        if ws[WS_IQ_INTEG] > clamp:
            ws[WS_IQ_INTEG] = clamp
        elif ws[WS_IQ_INTEG] < -clamp:
            ws[WS_IQ_INTEG] = -clamp
        iq_sup += wp[WP_KP_AC] * e_v
        iq_cmd = -iq_sup  # +support (capacitive injection) = negative q-axis current

        mag = math.sqrt(id_ref * id_ref + iq_cmd * iq_cmd)
        if mag > 1.0:
            id_ref /= mag
            iq_cmd /= mag
            ws[WS_CLAMPS] += 1.0
    ws[WS_IDREF] = id_ref
    ws[WS_IQREF] = iq_cmd

    br = wt.br_filter[w]
    ia = net.ibr[br, 0]
    ib = net.ibr[br, 1]
    ic = net.ibr[br, 2]
    ihat = wp[WP_IHAT_LV]
    i_d, i_q = _park(ia, ib, ic, theta)
    i_d /= ihat
    i_q /= ihat

    e_d = id_ref - i_d
    e_q = iq_cmd - i_q
    if k_next < wt.inj_start[w]:
        # synchronising: a stiff P-only null-current loop (high virtual
        # resistance) rides through the transformer energisation transient
        u_d = wp[WP_KP_BOOT] * e_d
        u_q = wp[WP_KP_BOOT] * e_q
    else:
        ws[WS_CCD_INTEG] += wp[WP_KI_CC] * e_d * dt
        ws[WS_CCQ_INTEG] += wp[WP_KI_CC] * e_q * dt
        u_d = wp[WP_KP_CC] * e_d + ws[WS_CCD_INTEG]
        u_q = wp[WP_KP_CC] * e_q + ws[WS_CCQ_INTEG]

    # feedforward/decoupling on low-passed dq measurements: DC-exact at the
    # fundamental, attenuates the filter/leakage resonance that the one-step
    # command delay would otherwise undamp
    aff = wp[WP_ALPHA_FF]
    ws[WS_FFD] += aff * (v_d - ws[WS_FFD])
    ws[WS_FFQ] += aff * (v_q - ws[WS_FFQ])
    ws[WS_FID] += aff * (i_d - ws[WS_FID])
    ws[WS_FIQ] += aff * (i_q - ws[WS_FIQ])

    wrel = omega / wp[WP_W0]
    vc_d = ws[WS_FFD] + wp[WP_R_PU] * ws[WS_FID] - wp[WP_L_PU] * wrel * ws[WS_FIQ] + u_d
    vc_q = ws[WS_FFQ] + wp[WP_R_PU] * ws[WS_FIQ] + wp[WP_L_PU] * wrel * ws[WS_FID] + u_q
    vmag = math.sqrt(vc_d * vc_d + vc_q * vc_q)
    if vmag > wp[WP_VC_MAX]:
        s = wp[WP_VC_MAX] / vmag
        vc_d *= s
        vc_q *= s

    ea, eb, ec = _inverse_park(vc_d * vhat, vc_q * vhat, theta)
    g = wt.gsrc[w]
    net.inj[wt.node_cv[w], 0] = g * ea
    net.inj[wt.node_cv[w], 1] = g * eb
    net.inj[wt.node_cv[w], 2] = g * ec

    p_inst = va * ia + vb * ib + vc * ic
    q_inst = _instant_q(va, vb, vc, ia, ib, ic)
    ws[WS_PMEAS] = _ma_push(wt.pq_buf, wt.pq_pos, wt.pq_sum, 2 * w, p_inst)
    ws[WS_QMEAS] = _ma_push(wt.pq_buf, wt.pq_pos, wt.pq_sum, 2 * w + 1, q_inst)


def _ext_src_step(t_next, net, ext):
    """Write next-step injections of the fixed-frequency ideal sources."""
    for s in range(ext.node.shape[0]):
        th = ext.w[s] * t_next + ext.phase0[s]
        amp = ext.vhat[s] * ext.gsrc[s]
        node = ext.node[s]
        net.inj[node, 0] = amp * math.cos(th)
        net.inj[node, 1] = amp * math.cos(th - TWO_THIRDS_PI)
        net.inj[node, 2] = amp * math.cos(th + TWO_THIRDS_PI)


def _sync_step(k_next, dt, net, sync, bess):
    """Sliding-DFT phasor comparison across the tie breaker; returns True on
    permit. While armed, nudges the battery's frequency-trim target to slew the
    standing angle difference into the closing window (sync assist)."""
    if sync.armed_step[0] < 0 or k_next < sync.armed_step[0]:
        return False
    w = sync.bufc.shape[1]
    t = k_next * dt
    cref = math.cos(TWO_PI * 50.0 * t)
    sref = math.sin(TWO_PI * 50.0 * t)
    pos = sync.pos[0]
    for side in range(2):
        va = net.v[sync.nodes[side], 0]
        sync.sums[side, 0] += va * cref - sync.bufc[side, pos]
        sync.sums[side, 1] += va * sref - sync.bufs[side, pos]
        sync.bufc[side, pos] = va * cref
        sync.bufs[side, pos] = va * sref
    pos += 1
    if pos == w:
        pos = 0
        for side in range(2):
            accc = 0.0
            accs = 0.0
            for j in range(w):
                accc += sync.bufc[side, j]
                accs += sync.bufs[side, j]
            sync.sums[side, 0] = accc
            sync.sums[side, 1] = accs
    sync.pos[0] = pos
    if sync.count[0] < w:
        sync.count[0] += 1
        return False

    st = sync.state
    mag_i = 2.0 * math.hypot(sync.sums[0, 0], sync.sums[0, 1]) / w / sync.vhat[0]
    mag_g = 2.0 * math.hypot(sync.sums[1, 0], sync.sums[1, 1]) / w / sync.vhat[1]
    th_i = math.atan2(-sync.sums[0, 1], sync.sums[0, 0])
    th_g = math.atan2(-sync.sums[1, 1], sync.sums[1, 0])
    dth = th_i - th_g
    while dth > math.pi:
        dth -= TWO_PI
    while dth < -math.pi:
        dth += TWO_PI
    slip_inst = (dth - st[SS_DTH_PREV]) / dt / TWO_PI
    if slip_inst > 25.0 / (w * dt):  # wrap glitch guard
        slip_inst = st[SS_SLIP_LP]
    elif slip_inst < -25.0 / (w * dt):
        slip_inst = st[SS_SLIP_LP]
    st[SS_DTH_PREV] = dth
    st[SS_SLIP_LP] += (1.0 - math.exp(-50.0 * dt)) * (slip_inst - st[SS_SLIP_LP])
    st[SS_DV] = mag_i - mag_g
    st[SS_DF] = st[SS_SLIP_LP]
    st[SS_DTH] = dth

    if bess.present[0] != 0 and sync.count[2] == 0:
        # slew toward alignment fast enough that the frequency-match condition
        # itself blocks the permit until the angle is nearly closed, then coast
        if dth > 0.0175:  # 1 degree
            bess.state[BS_WBIAS] = -0.2 * TWO_PI
        elif dth < -0.0175:
            bess.state[BS_WBIAS] = 0.2 * TWO_PI
        else:
            bess.state[BS_WBIAS] = 0.0

    lim = sync.limits
    ok = (
        abs(st[SS_DF]) <= lim[SL_MAX_DF]
        and abs(st[SS_DV]) <= lim[SL_MAX_DV]
        and abs(st[SS_DTH]) <= lim[SL_MAX_DTH]
    )
    if ok:
        sync.count[1] += 1
    else:
        sync.count[1] = 0
    if sync.count[2] != 0:  # permit already issued; keep channels only
        return False
    return sync.count[1] >= lim[SL_DWELL_STEPS]


# ---------------------------------------------------------------------------
# post-step bookkeeping shared by both drivers
# ---------------------------------------------------------------------------

def _post_step(k, dt, net, bess, bank, wt, ext, sync, chan):
    """Controllers, trackers, envelopes and decimated emission for step k -> k+1.

    Returns STATUS_SYNC_PERMIT when the synchrocheck clears, else STATUS_DONE.
    """
    k_next = k + 1
    t_next = k_next * dt

    _rms_bank_step(bank, net.v)
    if bess.present[0] != 0:
        _bess_step(t_next, dt, net, bess, bank)
    for w in range(wt.n):
        _wt_step(w, t_next, dt, k_next, net, wt, bank, 1)
    _ext_src_step(t_next + dt, net, ext)

    permit = _sync_step(k_next, dt, net, sync, bess)

    ne = chan.env_kind.shape[0]
    for e in range(ne):
        kind = chan.env_kind[e]
        idx = chan.env_idx[e]
        if kind == ENV_NODE_V:
            m = abs(net.v[idx, 0])
            m1 = abs(net.v[idx, 1])
            m2 = abs(net.v[idx, 2])
        elif kind == ENV_BR_I:
            m = abs(net.ibr[idx, 0])
            m1 = abs(net.ibr[idx, 1])
            m2 = abs(net.ibr[idx, 2])
        else:
            m = abs(net.aux[idx, 0])
            m1 = abs(net.aux[idx, 1])
            m2 = abs(net.aux[idx, 2])
        if m1 > m:
            m = m1
        if m2 > m:
            m = m2
        m *= chan.env_scale[e]
        if m > chan.env_acc[e]:
            chan.env_acc[e] = m

    if k_next % chan.decim == 0:
        row = k_next // chan.decim
        out = chan.out
        out[row, 0] = t_next
        col = 1
        for m in range(chan.mon_nodes.shape[0]):
            node = chan.mon_nodes[m]
            s = chan.mon_node_scale[m]
            out[row, col] = net.v[node, 0] * s
            out[row, col + 1] = net.v[node, 1] * s
            out[row, col + 2] = net.v[node, 2] * s
            col += 3
        for m in range(chan.mon_br.shape[0]):
            br = chan.mon_br[m]
            s = chan.mon_br_scale[m]
            out[row, col] = net.ibr[br, 0] * s
            out[row, col + 1] = net.ibr[br, 1] * s
            out[row, col + 2] = net.ibr[br, 2] * s
            col += 3
        if bess.present[0] != 0:
            c = chan.cols[COL_BESS]
            bs = bess.state
            out[row, c] = bs[BS_OMEGA] / TWO_PI
            out[row, c + 1] = bs[BS_VD]
            out[row, c + 2] = bs[BS_VRMS]
            out[row, c + 3] = bs[BS_PMEAS] * 1e-6
            out[row, c + 4] = bs[BS_QMEAS] * 1e-6
            out[row, c + 5] = bs[BS_PREF] * 1e-6
            out[row, c + 6] = bs[BS_SCALE]
            out[row, c + 7] = bs[BS_IPU]
        c = chan.cols[COL_WT]
        for w in range(wt.n):
            ws = wt.state[w]
            out[row, c] = ws[WS_OMEGA] / TWO_PI
            out[row, c + 1] = ws[WS_PMEAS] * 1e-6
            out[row, c + 2] = ws[WS_QMEAS] * 1e-6
            out[row, c + 3] = ws[WS_IDREF]
            out[row, c + 4] = ws[WS_IQREF]
            c += 5
        c = chan.cols[COL_ENV]
        for e in range(ne):
            out[row, c + e] = chan.env_acc[e]
            chan.env_acc[e] = 0.0
        if sync.armed_step[0] >= 0:
            c = chan.cols[COL_SYNC]
            out[row, c] = sync.state[SS_DV]
            out[row, c + 1] = sync.state[SS_DF]
            out[row, c + 2] = sync.state[SS_DTH] * 180.0 / math.pi

    if permit:
        return STATUS_SYNC_PERMIT
    return STATUS_DONE


# ---------------------------------------------------------------------------
# segment drivers
# ---------------------------------------------------------------------------

def _run_segment_py_impl(k0, n_steps, dt, net, bess, bank, wt, ext, sync, chan):
    for s in range(n_steps):
        k = k0 + s
        status = _circuit_substep_numpy(net)
        if status != STATUS_DONE:
            return status, k + 1
        status = _post_step(k, dt, net, bess, bank, wt, ext, sync, chan)
        if status != STATUS_DONE:
            return status, k + 1
    return STATUS_DONE, k0 + n_steps


def _run_segment_jit_impl(k0, n_steps, dt, net, bess, bank, wt, ext, sync, chan):
    for s in range(n_steps):
        k = k0 + s
        status = _circuit_substep_loops(net)
        if status != STATUS_DONE:
            return status, k + 1
        status = _post_step(k, dt, net, bess, bank, wt, ext, sync, chan)
        if status != STATUS_DONE:
            return status, k + 1
    return STATUS_DONE, k0 + n_steps


# jit-compile the shared pieces (no-op passthrough when the jit backend is off)
_sat_current = maybe_njit(_sat_current)
_park = maybe_njit(_park)
_inverse_park = maybe_njit(_inverse_park)
_wrap_2pi = maybe_njit(_wrap_2pi)
_pll_step = maybe_njit(_pll_step)
_instant_q = maybe_njit(_instant_q)
_circuit_substep_loops = maybe_njit(_circuit_substep_loops)
_rms_bank_step = maybe_njit(_rms_bank_step)
_ma_push = maybe_njit(_ma_push)
_bess_step = maybe_njit(_bess_step)
_wt_step = maybe_njit(_wt_step)
_ext_src_step = maybe_njit(_ext_src_step)
_sync_step = maybe_njit(_sync_step)
_post_step = maybe_njit(_post_step)

run_segment_numpy = _run_segment_py_impl
if JIT_ENABLED:
    run_segment_numba = numba.njit(cache=True)(_run_segment_jit_impl)
else:  # pragma: no cover - exercised via BLACKSTARTSIM_BACKEND=numpy
    run_segment_numba = None
