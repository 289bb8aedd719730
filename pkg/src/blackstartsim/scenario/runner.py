"""Wire a case definition and event schedule into the transient engine and
drive the stage machine from the resulting observations."""

import copy
import math
from dataclasses import dataclass, field

from ..circuit.engine import (
    BessPlacement,
    ConverterSet,
    ExtSourcePlacement,
    Monitors,
    RunResult,
    SyncSpec,
    WtPlacement,
    run_transient,
)
from ..circuit.elements import TwoWindingTransformer
from ..circuit.stamps import transformer_bases
from ..errors import ScenarioError
from . import schedule as sched
from .case import CaseDefinition
from .stages import StageMachine, StageObservations, advance_stage

P_REF_RAMP_S = 0.5   # dispatch ramp on battery power-reference updates


@dataclass
class ScenarioResult:
    run: RunResult
    stages: StageMachine
    case: CaseDefinition
    schedule: sched.EventSchedule
    dt: float

    @property
    def ts(self):
        return self.run.ts


def apply_toggles(case: CaseDefinition, saturation: bool = True,
                  current_limiter: bool = False,
                  i_limit_pu: float = 1.2) -> CaseDefinition:
    """Return a copy of ``case`` with transformer saturation stripped and/or
    the battery current limiter armed."""
    out = copy.deepcopy(case)
    if not saturation:
        for el in out.elements:
            if isinstance(el, TwoWindingTransformer):
                el.core = None
    if current_limiter:
        out.bess_params.i_limit_pu = i_limit_pu
    return out


def _transformer(case, name) -> TwoWindingTransformer:
    for el in case.elements:
        if isinstance(el, TwoWindingTransformer) and el.name == name:
            return el
    raise ScenarioError(f"case has no transformer {name!r}")


def default_monitors(case: CaseDefinition) -> Monitors:
    """ Standard channel set: key bus waveforms, converter/magnetizing currents,
    full-rate envelope trackers for peaks between decimated samples."""
    bess = case.bess_params
    ihat_bess = math.sqrt(2.0 / 3.0) * bess.s_rated_mva * 1e6 / (bess.v_rated_kv * 1e3)
    env = [
        ("bess_i", "branch_i", case.bess_filter_branch, ihat_bess),
        ("v220", "node_v", case.bess_meas_node, None),
        ("v66", "node_v", case.v_reg_node, None),
    ]
    for label, txname in (("mag_grid", "tx_grid"), ("mag_owf", "tx_owf")):
        try:
            tx = _transformer(case, txname)
        except ScenarioError:
            continue
        lam_b, cur_b = transformer_bases(tx)
        env.append((f"{label}_i", "branch_i", f"{txname}.mag", cur_b))
        env.append((f"{label}_flux", "branch_flux", f"{txname}.mag", lam_b))
    return Monitors(
        nodes=list(case.monitor_nodes),
        branches=list(case.monitor_branches),
        envelopes=env,
    )


def compile_run(case: CaseDefinition, schedule: sched.EventSchedule):
    """Translate schedule actions into engine primitives. Returns
    (network, breaker_events, converters, sync_spec)."""
    network = case.build_network()
    for name, closed in schedule.initial_breakers.items():
        network.breaker(name).closed = closed

    window = schedule.soft_charge_window()
    if window is None:
        ramp = (0.0, 0.0)
        preload = True
    else:
        ramp = window
        preload = False

    pref_knots = [(0.0, 0.0)]
    breaker_events = []
    wt_placements = {
        w.name: WtPlacement(w.name, case.wt_params, w.name, w.terminal_node,
                            w.filter_branch)
        for w in case.wts
    }
    arm_time = math.inf

    for e in schedule.events:
        if e.action in (sched.SOFT_CHARGE_START, sched.SOFT_CHARGE_END):
            continue
        if e.action == sched.ENABLE_WT:
            unit = case.wt(e.target)
            breaker_events.append((e.time_s, unit.breaker, True))
            wp = wt_placements[unit.name]
            wp.pll_start_s = e.time_s
            wp.inj_start_s = e.time_s + case.wt_params.sync_delay_s
        elif e.action == sched.CLOSE_BREAKER:
            breaker_events.append((e.time_s, e.target, True))
        elif e.action == sched.ENERGISE_BLOCK_LOAD:
            breaker_events.append((e.time_s, case.block_load_breaker, True))
            if not math.isnan(e.value_mw):
                pref_knots.append((e.time_s, pref_knots[-1][1]))
                pref_knots.append((e.time_s + P_REF_RAMP_S, e.value_mw))
        elif e.action == sched.SET_BESS_P_REF:
            pref_knots.append((e.time_s, pref_knots[-1][1]))
            pref_knots.append((e.time_s + P_REF_RAMP_S, e.value_mw))
        elif e.action == sched.SYNCHROCHECK_ARM:
            arm_time = e.time_s

    bess = BessPlacement(
        params=case.bess_params,
        source=case.bess_source,
        meas_node=case.bess_meas_node,
        power_node=case.bess_power_node,
        filter_branch=case.bess_filter_branch,
        ramp=ramp,
        p_ref_knots=tuple(pref_knots),
        preload_rms=preload,
    )
    ext = []
    if case.grid_source is not None:
        ext.append(ExtSourcePlacement(case.grid_source))
    converters = ConverterSet(
        bess=bess,
        wts=list(wt_placements.values()),
        v_reg_node=case.v_reg_node,
        ext_sources=ext,
    )

    sync_spec = None
    if math.isfinite(arm_time):
        if case.tie_breaker is None or case.grid_node is None:
            raise ScenarioError(
                "synchrocheck armed but the case has no external grid / tie breaker"
            )
        sc = case.synchrocheck
        sync_spec = SyncSpec(
            island_node=case.island_node,
            grid_node=case.grid_node,
            tie_breaker=case.tie_breaker,
            max_df_hz=sc.max_df_hz,
            max_dv_pu=sc.max_dv_pu,
            max_dtheta_deg=sc.max_dtheta_deg,
            dwell_s=sc.dwell_s,
            arm_time_s=arm_time,
        )
    return network, breaker_events, converters, sync_spec


def _drive_stages(result: RunResult, schedule: sched.EventSchedule,
                  case: CaseDefinition, dt: float) -> StageMachine:
    """Reconstruct the stage log from run observations: the battery forms
    voltage at the first step after its (ramp) start; block load and tie
    closures come from the applied-event log."""
    window = schedule.soft_charge_window()
    first_v = (window[0] if window else 0.0) + dt

    timeline = [(first_v, "volts")]
    for t, name, closed, status in result.events:
        if status != "applied" or not closed:
            continue
        if name == case.block_load_breaker:
            timeline.append((t, "load"))
        if case.tie_breaker is not None and name == case.tie_breaker:
            timeline.append((t, "tie"))
    timeline.sort()

    machine = StageMachine()
    obs = StageObservations()
    for t, what in timeline:
        if what == "volts":
            obs.bess_voltage_nonzero = True
        elif what == "load":
            obs.block_load_energised = True
        elif what == "tie":
            obs.tie_breaker_closed = True
        advance_stage(machine, t, obs)
    return machine


def run_case(case: CaseDefinition, schedule: sched.EventSchedule,
             dt: float = 50e-6, decimation: int = 20,
             backend: str | None = None,
             duration_s: float | None = None) -> ScenarioResult:
    """Assemble, run and post-process one scenario."""
    network, breaker_events, converters, sync_spec = compile_run(case, schedule)
    duration = schedule.duration_s if duration_s is None else duration_s
    result = run_transient(
        network, breaker_events, duration, dt,
        converters=converters, sync=sync_spec,
        monitors=default_monitors(case), decimation=decimation,
        backend=backend,
    )
    stages = _drive_stages(result, schedule, case, dt)
    return ScenarioResult(run=result, stages=stages, case=case,
                          schedule=schedule, dt=dt)
