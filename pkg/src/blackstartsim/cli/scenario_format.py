"""Line-oriented plain-text scenario files: ``section.key = value`` pairs with
units in the key names, ``#`` comments. Serialize/parse round-trips are
structurally exact (floats via repr).
"""

import math

from ..circuit.elements import (
    Breaker,
    Capacitor,
    ControlledCurrentSource,
    ControlledVoltageSource,
    Inductor,
    Node,
    PiSection,
    Resistor,
    RlLoad,
    SaturationCurve,
    ShuntReactor,
    TwoWindingTransformer,
)
from ..converters.gfl import GflWtParams
from ..converters.gfm import GfmBessParams
from ..converters.pll import PllParams
from ..errors import ScenarioFormatError
from ..scenario.case import CaseDefinition, WtUnit
from ..scenario.schedule import ACTIONS, Event, EventSchedule
from ..scenario.synchrocheck import SynchrocheckSettings
from .runconfig import RunConfig

_KIND_NAMES = {
    Resistor: "resistor",
    Inductor: "inductor",
    Capacitor: "capacitor",
    PiSection: "pi_section",
    ShuntReactor: "shunt_reactor",
    TwoWindingTransformer: "transformer",
    Breaker: "breaker",
    RlLoad: "rl_load",
    ControlledVoltageSource: "vsource",
    ControlledCurrentSource: "isource",
}

# kind -> ordered (key, attribute, converter) parameter map
_F = float
_ELEMENT_PARAMS = {
    "resistor": (("r_ohm", "r_ohm", _F),),
    "inductor": (("l_h", "l_h", _F),),
    "capacitor": (("c_f", "c_f", _F),),
    "pi_section": (
        ("r_series_ohm", "r_series_ohm", _F),
        ("l_series_h", "l_series_h", _F),
        ("c_shunt_each_end_f", "c_shunt_each_end_f", _F),
    ),
    "shunt_reactor": (
        ("q_rated_mvar", "q_rated_mvar", _F),
        ("nominal_kv", "nominal_kv", _F),
        ("x_over_r", "x_over_r", _F),
    ),
    "transformer": (
        ("s_rated_mva", "s_rated_mva", _F),
        ("v_hv_kv", "v_hv_kv", _F),
        ("v_lv_kv", "v_lv_kv", _F),
        ("r_leak_pu", "r_leak_pu", _F),
        ("x_leak_pu", "x_leak_pu", _F),
        ("mag_l_pu", "mag_l_pu", _F),
    ),
    "breaker": (
        ("g_open_s", "g_open_s", _F),
        ("g_closed_s", "g_closed_s", _F),
    ),
    "rl_load": (
        ("p_rated_mw", "p_rated_mw", _F),
        ("nominal_kv", "nominal_kv", _F),
        ("q_rated_mvar", "q_rated_mvar", _F),
    ),
    "vsource": (("r_internal_ohm", "r_internal_ohm", _F),),
    "isource": (),
}

_BESS_FIELDS = (
    "s_rated_mva", "p_rated_mw", "q_rated_mvar", "v_rated_kv",
    "filter_l_pu", "filter_r_pu", "tx_r_pu", "tx_x_pu", "tx_hv_kv",
    "k_v", "k_p", "v_ref_pu", "error_filter_rad_s", "droop_p_filter_s",
    "f_trim_mw_per_hz_s", "i_limit_pu",
)

_WT_FIELDS = (
    "p_rated_mw", "power_factor", "filter_l_pu", "filter_r_pu",
    "filter_shunt_r_pu", "filter_shunt_c_pu", "tx_r_pu", "tx_x_pu",
    "tx_hv_kv", "lv_kv", "cc_k_p", "cc_t_i_s", "f_droop", "v_droop",
    "v_k_p", "v_t_i_s", "ac_v_k_p", "v_ref_pu", "p_ref_base_pu",
    "vc_max_pu", "sync_delay_s", "ff_rad_s", "boot_k_p",
)

_PLL_FIELDS = ("k_p", "t_i_s", "prefilter_rad_s")

_SYNC_FIELDS = ("max_df_hz", "max_dv_pu", "max_dtheta_deg", "dwell_s")

_RUN_FIELDS = (
    ("dt_s", _F),
    ("duration_s", _F),
    ("decimation", int),
    ("saturation", None),       # bool
    ("current_limiter", None),
    ("resync", None),
)

_LIMIT_FIELDS = ("v_low_pu", "v_high_pu", "f_low_hz", "f_high_hz",
                 "converter_i_cap_pu")

_CASE_STR_FIELDS = (
    "name", "bess_source", "bess_meas_node", "bess_power_node",
    "bess_filter_branch", "v_reg_node", "main_breaker", "block_load_breaker",
    "island_node", "grid_node", "tie_breaker", "grid_source",
)


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_scenario(case: CaseDefinition, schedule: EventSchedule,
                       config: "RunConfig") -> str:
    """Dump the full case, schedule and run configuration as scenario text."""
    out = ["# blackstartsim scenario"]
    for f in _CASE_STR_FIELDS:
        v = getattr(case, f)
        if v is not None:
            out.append(f"case.{f} = {v}")
    out.append(f"case.monitor_nodes = {','.join(case.monitor_nodes)}")
    out.append(f"case.monitor_branches = {','.join(case.monitor_branches)}")

    out.append("")
    for node in case.nodes:
        out.append(f"node.{node.name}.kv = {_fmt(node.nominal_kv)}")

    out.append("")
    for el in case.elements:
        kind = _KIND_NAMES[type(el)]
        out.append(f"element.{el.name}.kind = {kind}")
        if kind == "transformer":
            out.append(f"element.{el.name}.nodes = {el.node_hv},{el.node_lv}")
        else:
            out.append(f"element.{el.name}.nodes = {el.node_a},{el.node_b}")
        for key, attr, _ in _ELEMENT_PARAMS[kind]:
            out.append(f"element.{el.name}.{key} = {_fmt(getattr(el, attr))}")
        if kind == "breaker":
            out.append(f"element.{el.name}.closed = {_fmt(el.closed)}")
        if kind == "transformer":
            if el.core is None:
                out.append(f"element.{el.name}.core = linear")
            else:
                knots = ";".join(f"{_fmt(f)}:{_fmt(i)}" for f, i in el.core.knots)
                out.append(f"element.{el.name}.core = saturable")
                out.append(f"element.{el.name}.sat_knots = {knots}")

    out.append("")
    b = case.bess_params
    for f in _BESS_FIELDS:
        out.append(f"bess.{f} = {_fmt(getattr(b, f))}")

    out.append("")
    w = case.wt_params
    for f in _WT_FIELDS:
        out.append(f"wt_params.{f} = {_fmt(getattr(w, f))}")
    for f in _PLL_FIELDS:
        out.append(f"wt_params.pll_{f} = {_fmt(getattr(w.pll, f))}")
    for unit in case.wts:
        out.append(f"wt.{unit.name}.terminal_node = {unit.terminal_node}")
        out.append(f"wt.{unit.name}.breaker = {unit.breaker}")
        out.append(f"wt.{unit.name}.filter_branch = {unit.filter_branch}")

    out.append("")
    for f in _SYNC_FIELDS:
        out.append(f"synchrocheck.{f} = {_fmt(getattr(case.synchrocheck, f))}")

    out.append("")
    for n, e in enumerate(schedule.events, 1):
        out.append(f"event.{n}.time_s = {_fmt(e.time_s)}")
        out.append(f"event.{n}.action = {e.action}")
        if e.target:
            out.append(f"event.{n}.target = {e.target}")
        if not math.isnan(e.value_mw):
            out.append(f"event.{n}.value_mw = {_fmt(e.value_mw)}")
    out.append(f"schedule.duration_s = {_fmt(schedule.duration_s)}")
    for name, closed in sorted(schedule.initial_breakers.items()):
        out.append(f"schedule.initial.{name} = {_fmt(closed)}")

    out.append("")
    out.append(f"run.dt_s = {_fmt(config.dt_s)}")
    if config.duration_s is not None:
        out.append(f"run.duration_s = {_fmt(config.duration_s)}")
    out.append(f"run.decimation = {config.decimation}")
    out.append(f"run.saturation = {_fmt(config.saturation)}")
    out.append(f"run.current_limiter = {_fmt(config.current_limiter)}")
    out.append(f"run.resync = {_fmt(config.resync)}")
    env = config.envelope
    for f in _LIMIT_FIELDS:
        out.append(f"limits.{f} = {_fmt(getattr(env, f))}")
    return "\n".join(out) + "\n"


class _Parser:
    def __init__(self, text):
        self.pairs = []  # (line_no, key, value)
        for ln, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ScenarioFormatError(f"expected 'key = value', got {line!r}", ln)
            key, _, value = line.partition("=")
            self.pairs.append((ln, key.strip(), value.strip()))

    @staticmethod
    def _float(value, ln, key):
        try:
            return float(value)
        except ValueError:
            raise ScenarioFormatError(f"{key}: not a number: {value!r}", ln) from None

    @staticmethod
    def _bool(value, ln, key):
        if value in ("true", "false"):
            return value == "true"
        raise ScenarioFormatError(f"{key}: expected true/false, got {value!r}", ln)


def parse_scenario(text: str):
    """Parse scenario text into (CaseDefinition, EventSchedule, RunConfig).

    Unknown keys are rejected with their line number; semantic errors (dangling
    node references, invalid parameters) carry the offending identifier.
    """
    from ..measure.limits import LimitEnvelope

    parser = _Parser(text)
    case_kv = {}
    nodes = {}
    element_kv = {}
    element_order = []
    bess_kv = {}
    wt_kv = {}
    wt_units = {}
    sync_kv = {}
    events = {}
    schedule_kv = {"duration_s": None}
    initial = {}
    run_kv = {}
    limits_kv = {}

    for ln, key, value in parser.pairs:
        parts = key.split(".")
        head = parts[0]
        try:
            if head == "case" and len(parts) == 2:
                case_kv[parts[1]] = (ln, value)
            elif head == "node" and len(parts) == 3 and parts[2] == "kv":
                nodes[parts[1]] = parser._float(value, ln, key)
            elif head == "element" and len(parts) == 3:
                name, param = parts[1], parts[2]
                if name not in element_kv:
                    element_kv[name] = {}
                    element_order.append(name)
                element_kv[name][param] = (ln, value)
            elif head == "bess" and len(parts) == 2:
                bess_kv[parts[1]] = parser._float(value, ln, key)
            elif head == "wt_params" and len(parts) == 2:
                wt_kv[parts[1]] = parser._float(value, ln, key)
            elif head == "wt" and len(parts) == 3:
                wt_units.setdefault(parts[1], {})[parts[2]] = (ln, value)
            elif head == "synchrocheck" and len(parts) == 2:
                sync_kv[parts[1]] = parser._float(value, ln, key)
            elif head == "event" and len(parts) == 3:
                events.setdefault(int(parts[1]), {})[parts[2]] = (ln, value)
            elif head == "schedule" and parts[1] == "duration_s" and len(parts) == 2:
                schedule_kv["duration_s"] = parser._float(value, ln, key)
            elif head == "schedule" and parts[1] == "initial" and len(parts) == 3:
                initial[parts[2]] = parser._bool(value, ln, key)
            elif head == "run" and len(parts) == 2:
                run_kv[parts[1]] = (ln, value)
            elif head == "limits" and len(parts) == 2:
                limits_kv[parts[1]] = parser._float(value, ln, key)
            else:
                raise ScenarioFormatError(f"unknown key {key!r}", ln)
        except ValueError as exc:
            raise ScenarioFormatError(f"{key}: {exc}", ln) from None

    # ---- case scalars ----
    def case_str(fieldname, default=None):
        if fieldname in case_kv:
            return case_kv.pop(fieldname)[1]
        return default

    name = case_str("name", "scenario")
    mon_nodes = case_str("monitor_nodes", "")
    mon_branches = case_str("monitor_branches", "")
    case_fields = {}
    for f in _CASE_STR_FIELDS[1:]:
        case_fields[f] = case_str(f)
    if case_kv:
        ln = next(iter(case_kv.values()))[0]
        raise ScenarioFormatError(f"unknown case key {next(iter(case_kv))!r}", ln)
    required = ("bess_source", "bess_meas_node", "bess_power_node",
                "bess_filter_branch", "v_reg_node", "main_breaker",
                "block_load_breaker", "island_node")
    for f in required:
        if case_fields[f] is None:
            raise ScenarioFormatError(f"missing required key case.{f}")

    # ---- elements ----
    node_objs = [Node(n, kv) for n, kv in nodes.items()]
    known_nodes = set(nodes) | {"gnd"}
    elements = []
    for el_name in element_order:
        params = element_kv[el_name]
        if "kind" not in params:
            raise ScenarioFormatError(f"element {el_name!r} missing kind")
        ln, kind = params.pop("kind")
        if kind not in _ELEMENT_PARAMS:
            raise ScenarioFormatError(f"unknown element kind {kind!r}", ln)
        if "nodes" not in params:
            raise ScenarioFormatError(f"element {el_name!r} missing nodes", ln)
        ln_n, node_str = params.pop("nodes")
        refs = [s.strip() for s in node_str.split(",")]
        if len(refs) != 2:
            raise ScenarioFormatError(
                f"element {el_name!r}: expected two node refs", ln_n)
        for ref in refs:
            if ref not in known_nodes:
                raise ScenarioFormatError(
                    f"element {el_name!r} references unknown node {ref!r}", ln_n)
        kwargs = {}
        for key, attr, conv in _ELEMENT_PARAMS[kind]:
            if key in params:
                ln_p, v = params.pop(key)
                kwargs[attr] = parser._float(v, ln_p, key)
        try:
            if kind == "transformer":
                core = None
                if "core" in params:
                    ln_c, core_kind = params.pop("core")
                    if core_kind == "saturable":
                        if "sat_knots" not in params:
                            raise ScenarioFormatError(
                                f"element {el_name!r}: saturable core without sat_knots",
                                ln_c)
                        ln_k, knot_str = params.pop("sat_knots")
                        knots = []
                        for pair in knot_str.split(";"):
                            f_s, _, i_s = pair.partition(":")
                            knots.append((parser._float(f_s, ln_k, "sat_knots"),
                                          parser._float(i_s, ln_k, "sat_knots")))
                        core = SaturationCurve(tuple(knots))
                    elif core_kind != "linear":
                        raise ScenarioFormatError(
                            f"element {el_name!r}: unknown core {core_kind!r}", ln_c)
                el = TwoWindingTransformer(el_name, refs[0], refs[1],
                                           core=core, **kwargs)
            elif kind == "breaker":
                closed = False
                if "closed" in params:
                    ln_b, v = params.pop("closed")
                    closed = parser._bool(v, ln_b, "closed")
                el = Breaker(el_name, refs[0], refs[1], closed=closed, **kwargs)
            else:
                cls = {v: k for k, v in _KIND_NAMES.items()}[kind]
                el = cls(el_name, refs[0], node_b=refs[1], **kwargs)
        except TypeError as exc:
            raise ScenarioFormatError(f"element {el_name!r}: {exc}") from None
        except Exception as exc:
            raise ScenarioFormatError(f"element {el_name!r}: {exc}") from None
        if params:
            bad = next(iter(params))
            raise ScenarioFormatError(
                f"element {el_name!r}: unknown key {bad!r}", params[bad][0])
        elements.append(el)

    # ---- converter parameters ----
    try:
        bess_params = GfmBessParams(**{k: v for k, v in bess_kv.items()
                                       if k in _BESS_FIELDS})
    except Exception as exc:
        raise ScenarioFormatError(f"bess parameters: {exc}") from None
    unknown = set(bess_kv) - set(_BESS_FIELDS)
    if unknown:
        raise ScenarioFormatError(f"unknown bess key {unknown.pop()!r}")

    pll_kwargs = {}
    wt_kwargs = {}
    for k, v in wt_kv.items():
        if k.startswith("pll_") and k[4:] in _PLL_FIELDS:
            pll_kwargs[k[4:]] = v
        elif k in _WT_FIELDS:
            wt_kwargs[k] = v
        else:
            raise ScenarioFormatError(f"unknown wt_params key {k!r}")
    try:
        wt_params = GflWtParams(pll=PllParams(**pll_kwargs), **wt_kwargs)
    except Exception as exc:
        raise ScenarioFormatError(f"wt parameters: {exc}") from None

    units = []
    for wname in wt_units:
        u = wt_units[wname]
        missing = {"terminal_node", "breaker", "filter_branch"} - set(u)
        if missing:
            raise ScenarioFormatError(f"wt {wname!r} missing {missing.pop()!r}")
        extra = set(u) - {"terminal_node", "breaker", "filter_branch"}
        if extra:
            bad = extra.pop()
            raise ScenarioFormatError(f"wt {wname!r}: unknown key {bad!r}", u[bad][0])
        units.append(WtUnit(wname, u["terminal_node"][1], u["breaker"][1],
                            u["filter_branch"][1]))

    unknown = set(sync_kv) - set(_SYNC_FIELDS)
    if unknown:
        raise ScenarioFormatError(f"unknown synchrocheck key {unknown.pop()!r}")
    sync = SynchrocheckSettings(**sync_kv)

    # ---- schedule ----
    event_list = []
    for n in sorted(events):
        e = events[n]
        extra = set(e) - {"time_s", "action", "target", "value_mw"}
        if extra:
            raise ScenarioFormatError(
                f"event {n}: unknown key {extra.pop()!r}")
        if "time_s" not in e or "action" not in e:
            raise ScenarioFormatError(f"event {n}: needs time_s and action")
        ln_a, action = e["action"]
        if action not in ACTIONS:
            raise ScenarioFormatError(f"event {n}: unknown action {action!r}", ln_a)
        t = parser._float(e["time_s"][1], e["time_s"][0], "time_s")
        target = e.get("target", (0, ""))[1]
        value = (parser._float(e["value_mw"][1], e["value_mw"][0], "value_mw")
                 if "value_mw" in e else math.nan)
        event_list.append(Event(t, action, target, value))
    duration = schedule_kv["duration_s"]
    if duration is None:
        duration = max([e.time_s for e in event_list], default=0.0)
    try:
        schedule = EventSchedule(events=event_list, initial_breakers=initial,
                                 duration_s=duration)
    except Exception as exc:
        raise ScenarioFormatError(f"schedule: {exc}") from None

    # ---- run config ----
    cfg_kwargs = {}
    for fieldname, conv in _RUN_FIELDS:
        if fieldname in run_kv:
            ln, v = run_kv.pop(fieldname)
            if conv is None:
                cfg_kwargs[fieldname] = parser._bool(v, ln, fieldname)
            elif conv is int:
                cfg_kwargs[fieldname] = int(parser._float(v, ln, fieldname))
            else:
                cfg_kwargs[fieldname] = conv(parser._float(v, ln, fieldname))
    if run_kv:
        bad = next(iter(run_kv))
        raise ScenarioFormatError(f"unknown run key {bad!r}", run_kv[bad][0])
    unknown = set(limits_kv) - set(_LIMIT_FIELDS)
    if unknown:
        raise ScenarioFormatError(f"unknown limits key {unknown.pop()!r}")
    envelope = LimitEnvelope(**limits_kv)

    case = CaseDefinition(
        name=name,
        nodes=node_objs,
        elements=elements,
        bess_params=bess_params,
        bess_source=case_fields["bess_source"],
        bess_meas_node=case_fields["bess_meas_node"],
        bess_power_node=case_fields["bess_power_node"],
        bess_filter_branch=case_fields["bess_filter_branch"],
        wt_params=wt_params,
        wts=units,
        v_reg_node=case_fields["v_reg_node"],
        main_breaker=case_fields["main_breaker"],
        block_load_breaker=case_fields["block_load_breaker"],
        island_node=case_fields["island_node"],
        grid_node=case_fields["grid_node"],
        tie_breaker=case_fields["tie_breaker"],
        grid_source=case_fields["grid_source"],
        synchrocheck=sync,
        monitor_nodes=[s for s in mon_nodes.split(",") if s],
        monitor_branches=[s for s in mon_branches.split(",") if s],
    )
    config = RunConfig(scenario=name, envelope=envelope, **cfg_kwargs)

    # semantic validation: schedule targets and case references must exist
    _validate_semantics(case, schedule)
    return case, schedule, config


def _validate_semantics(case: CaseDefinition, schedule: EventSchedule):
    from ..scenario.schedule import CLOSE_BREAKER, ENABLE_WT

    try:
        network = case.build_network()
    except Exception as exc:
        raise ScenarioFormatError(str(exc)) from None
    breakers = set(network.breakers())
    wt_names = set(case.wt_names())
    for e in schedule.events:
        if e.action == CLOSE_BREAKER and e.target not in breakers:
            raise ScenarioFormatError(
                f"event at {e.time_s} s names unknown breaker {e.target!r}")
        if e.action == ENABLE_WT and e.target not in wt_names:
            raise ScenarioFormatError(
                f"event at {e.time_s} s names unknown WT {e.target!r}")
    for bname in schedule.initial_breakers:
        if bname not in breakers:
            raise ScenarioFormatError(
                f"initial breaker state names unknown breaker {bname!r}")
