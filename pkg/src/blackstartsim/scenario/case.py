"""Reference offshore-wind-farm black-start case.

One grid-forming battery (112 MVA at the onshore 220 kV bus through a
33/220 kV transformer), a 100 km 220 kV export cable (40 km land as four
10 km pi sections, 60 km submarine as six), 190 + 130 Mvar shunt reactors,
a saturable 400/220 kV 475 MVA and 220/66 kV 240 MVA transformer, one array
of six 12 MW grid-following WTs on 12 km T-model cables, and a 20 MW block
load at 400 kV. An external-grid Thevenin source behind a tie breaker is
optional for re-synchronisation studies.

Cable electrical data used here (per km):
  export 220 kV: r = 0.03 ohm, l = 0.4 mH, c = 0.21801 uF. The charging
  capacitance is calibrated so the 100 km export system generates about
  331.5 Mvar at 220 kV, i.e. the 320 Mvar of installed reactor compensation
  plus the battery's expected steady-state absorption (Q = w C V^2).
  array 66 kV: r = 0.1 ohm, l = 0.35 mH, c = 0.10 uF (typical XLPE data).
"""

import math
from dataclasses import dataclass, field

from ..circuit.elements import (
    Breaker,
    Capacitor,
    ControlledVoltageSource,
    Inductor,
    Node,
    PiSection,
    Resistor,
    RlLoad,
    ShuntReactor,
    TwoWindingTransformer,
    default_saturation_curve,
)
from ..circuit.network import Network
from ..converters.gfl import GflWtParams
from ..converters.gfm import GfmBessParams
from ..errors import ScenarioError
from .synchrocheck import SynchrocheckSettings

OMEGA = 2.0 * math.pi * 50.0

# export cable, per km
EXPORT_R_OHM_KM = 0.03
EXPORT_L_H_KM = 0.4e-3
EXPORT_Q_TARGET_MVAR = 331.5   # 320 Mvar reactors + steady battery absorption
EXPORT_LENGTH_KM = 100.0
EXPORT_C_F_KM = EXPORT_Q_TARGET_MVAR * 1e6 / (OMEGA * (220e3) ** 2 * EXPORT_LENGTH_KM)

# 66 kV array cable, per km
ARRAY_R_OHM_KM = 0.1
ARRAY_L_H_KM = 0.35e-3
ARRAY_C_F_KM = 0.10e-6
ARRAY_LENGTH_KM = 12.0


@dataclass
class WtUnit:
    name: str
    terminal_node: str   # converter LV bus
    breaker: str         # energisation breaker at the array-cable end
    filter_branch: str   # in-network converter filter inductor


@dataclass
class CaseDefinition:
    """Complete, self-consistent system description consumed by the runner."""

    name: str
    nodes: list
    elements: list
    bess_params: GfmBessParams
    bess_source: str
    bess_meas_node: str
    bess_power_node: str
    bess_filter_branch: str
    wt_params: GflWtParams
    wts: list
    v_reg_node: str
    main_breaker: str
    block_load_breaker: str
    island_node: str
    grid_node: str | None = None
    tie_breaker: str | None = None
    grid_source: str | None = None
    synchrocheck: SynchrocheckSettings = field(default_factory=SynchrocheckSettings)
    monitor_nodes: list = field(default_factory=list)
    monitor_branches: list = field(default_factory=list)

    def build_network(self) -> Network:
        net = Network()
        for node in self.nodes:
            net.add_node(node.name, node.nominal_kv)
        for el in self.elements:
            net.add(el)
        net.validate()
        return net

    def wt_names(self):
        return [w.name for w in self.wts]

    def wt(self, name):
        for w in self.wts:
            if w.name == name:
                return w
        raise ScenarioError(f"unknown WT {name!r}")


def build_default_case(n_wt: int = 6, saturation: bool = True,
                       with_external_grid: bool = False) -> CaseDefinition:
    """The default black-start system. ``n_wt`` scales the array; saturation
    applies to the 400/220 and 220/66 transformers; the external grid adds a
    Thevenin source behind the tie breaker at 400 kV."""
    if n_wt < 1:
        raise ScenarioError("n_wt must be >= 1")
    nodes = []
    elements = []

    def node(name, kv):
        nodes.append(Node(name, kv))
        return name

    # battery: converter EMF behind its R-L filter (R as source-internal
    # resistance, L as a network branch) -> 33 kV bus -> step-up transformer
    node("bessv", 33.0)
    node("bus33", 33.0)
    node("bus220bess", 220.0)
    node("bus220on", 220.0)
    # island-level frequency restoration keeps the formed frequency at 50 Hz
    # through the WT energisation sequence while the droop law shapes transients
    bess = GfmBessParams(f_trim_mw_per_hz_s=20.0)
    zb33 = (bess.v_rated_kv * 1e3) ** 2 / (bess.s_rated_mva * 1e6)
    elements += [
        ControlledVoltageSource("bess", "bessv", r_internal_ohm=bess.filter_r_pu * zb33),
        Inductor("bess_filter", "bessv", "bus33", bess.filter_l_pu * zb33 / OMEGA),
        TwoWindingTransformer(
            "tx_bess", "bus220bess", "bus33", bess.s_rated_mva,
            bess.tx_hv_kv, bess.v_rated_kv, bess.tx_r_pu, bess.tx_x_pu,
        ),
        Breaker("brk_main", "bus220bess", "bus220on", closed=True),
        ShuntReactor("reactor_on", "bus220on", 190.0, 220.0),
    ]

    # export cable: 40 km land + 60 km submarine, 10 km pi sections
    def pi_chain(prefix, start, end, n_sections, kv):
        prev = start
        for i in range(1, n_sections + 1):
            nxt = end if i == n_sections else node(f"{prefix}{i}", kv)
            elements.append(
                PiSection(
                    f"{prefix}_sec{i}", prev, nxt,
                    EXPORT_R_OHM_KM * 10.0, EXPORT_L_H_KM * 10.0,
                    EXPORT_C_F_KM * 10.0 / 2.0,
                )
            )
            prev = nxt

    node("cmid", 220.0)
    node("bus220off", 220.0)
    pi_chain("land", "bus220on", "cmid", 4, 220.0)
    pi_chain("sub", "cmid", "bus220off", 6, 220.0)
    elements.append(ShuntReactor("reactor_off", "bus220off", 130.0, 220.0))

    core_big = default_saturation_curve() if saturation else None
    node("bus400", 400.0)
    node("bus66", 66.0)
    elements += [
        TwoWindingTransformer(
            "tx_grid", "bus400", "bus220on", 475.0, 400.0, 220.0,
            0.002, 0.12, core=core_big,
        ),
        TwoWindingTransformer(
            "tx_owf", "bus220off", "bus66", 240.0, 220.0, 66.0,
            0.003, 0.12, core=default_saturation_curve() if saturation else None,
        ),
    ]

    # block load behind its breaker at 400 kV
    node("loadbus", 400.0)
    elements += [
        Breaker("brk_load", "bus400", "loadbus", closed=False),
        RlLoad("block_load", "loadbus", 20.0, 400.0),
    ]

    # WT array: star of 12 km T-model cables off the 66 kV bus
    wt_params = GflWtParams()
    zb_wt = (wt_params.lv_kv * 1e3) ** 2 / (wt_params.s_rated_mva * 1e6)
    shunt_c = wt_params.filter_shunt_c_pu / (OMEGA * zb_wt)
    shunt_r = wt_params.filter_shunt_r_pu * zb_wt
    half_r = ARRAY_R_OHM_KM * ARRAY_LENGTH_KM / 2.0
    half_l = ARRAY_L_H_KM * ARRAY_LENGTH_KM / 2.0
    mid_c = ARRAY_C_F_KM * ARRAY_LENGTH_KM
    wts = []
    for i in range(1, n_wt + 1):
        nm = f"wt{i}"
        n_r1 = node(f"{nm}_c1", 66.0)
        n_mid = node(f"{nm}_cm", 66.0)
        n_r2 = node(f"{nm}_c2", 66.0)
        n_hv = node(f"{nm}_hv", 66.0)
        n_tx = node(f"{nm}_tx", 66.0)
        n_lv = node(f"{nm}_lv", wt_params.lv_kv)
        n_fc = node(f"{nm}_fc", wt_params.lv_kv)
        n_cv = node(f"{nm}_cv", wt_params.lv_kv)
        elements += [
            Resistor(f"{nm}_cab_r1", "bus66", n_r1, half_r),
            Inductor(f"{nm}_cab_l1", n_r1, n_mid, half_l),
            Capacitor(f"{nm}_cab_c", n_mid, "gnd", mid_c),
            Resistor(f"{nm}_cab_r2", n_mid, n_r2, half_r),
            Inductor(f"{nm}_cab_l2", n_r2, n_hv, half_l),
            Breaker(f"brk_{nm}", n_hv, n_tx, closed=False),
            TwoWindingTransformer(
                f"tx_{nm}", n_tx, n_lv, wt_params.s_rated_mva,
                wt_params.tx_hv_kv, wt_params.lv_kv,
                wt_params.tx_r_pu, wt_params.tx_x_pu,
            ),
            Resistor(f"{nm}_filter_r", n_lv, n_fc, shunt_r),
            Capacitor(f"{nm}_filter_c", n_fc, "gnd", shunt_c),
            ControlledVoltageSource(nm, n_cv, r_internal_ohm=wt_params.filter_r_pu * zb_wt),
            Inductor(f"{nm}_filter", n_cv, n_lv, wt_params.filter_l_pu * zb_wt / OMEGA),
        ]
        wts.append(WtUnit(nm, n_lv, f"brk_{nm}", f"{nm}_filter"))

    grid_node = tie_breaker = grid_source = None
    if with_external_grid:
        node("gridsrc", 400.0)
        node("gridmid", 400.0)
        node("gridbus", 400.0)
        z = (400e3) ** 2 / (10.0 * 475e6)   # short-circuit ratio 10
        r = z / math.sqrt(1.0 + 10.0**2)    # X/R = 10
        elements += [
            ControlledVoltageSource("grid", "gridsrc"),
            Resistor("grid_r", "gridsrc", "gridmid", r),
            Inductor("grid_l", "gridmid", "gridbus", 10.0 * r / OMEGA),
            Breaker("brk_tie", "gridbus", "bus400", closed=False),
        ]
        grid_node = "gridbus"
        tie_breaker = "brk_tie"
        grid_source = "grid"

    mon_nodes = ["bus220bess", "bus220on", "bus66", "bus400"]
    mon_branches = ["bess_filter", "tx_grid.mag", "tx_owf.mag", "block_load"]
    return CaseDefinition(
        name="default-blackstart",
        nodes=nodes,
        elements=elements,
        bess_params=bess,
        bess_source="bess",
        bess_meas_node="bus220bess",
        bess_power_node="bus33",
        bess_filter_branch="bess_filter",
        wt_params=wt_params,
        wts=wts,
        v_reg_node="bus66",
        main_breaker="brk_main",
        block_load_breaker="brk_load",
        island_node="bus400",
        grid_node=grid_node,
        tie_breaker=tie_breaker,
        grid_source=grid_source,
        monitor_nodes=mon_nodes,
        monitor_branches=mon_branches,
    )
