"""Trapezoidal companion stamps for the element library.

``stamp_element`` returns the per-phase conductance pattern and history-current
injection of one element for one step. The branch convention is

    i(t+dt) = G * v_branch(t+dt) + h

with ``h`` computed from the previous-step state; the nodal right-hand side
receives ``-h`` at ``node_a`` and ``+h`` at ``node_b``.
"""

import math
from dataclasses import dataclass, field

from ..errors import CircuitError
from .elements import (
    GROUND,
    OMEGA_BASE,
    Breaker,
    Capacitor,
    ControlledCurrentSource,
    ControlledVoltageSource,
    Inductor,
    PiSection,
    Resistor,
    RlLoad,
    ShuntReactor,
    TwoWindingTransformer,
)


@dataclass
class BranchState:
    """Previous-step per-phase branch state used to form history currents."""

    i: float = 0.0       # branch current
    v: float = 0.0       # branch voltage
    v_c: float = 0.0     # internal capacitor voltage (series R-C)
    flux: float = 0.0    # flux linkage (magnetizing branch)


@dataclass
class CompanionStamp:
    """Conductance pattern plus history injection of one element, one phase."""

    conductances: list = field(default_factory=list)  # (node_i, node_j, siemens)
    history_branch: float = 0.0                       # h in i = G v + h
    history_injections: dict = field(default_factory=dict)  # node -> amperes

    def conductance(self):
        """Primary branch conductance (largest diagonal entry)."""
        diag = [g for i, j, g in self.conductances if i == j]
        return max(diag) if diag else 0.0


def _two_node_pattern(a, b, g):
    entries = [(a, a, g)]
    if b != GROUND:
        entries += [(b, b, g), (a, b, -g), (b, a, -g)]
    return entries


def series_rl_coeffs(r_ohm, l_h, dt):
    """(g, p1) of a series R-L branch: i1 = p1*i0 + g*(v0 + v1)."""
    a = dt / (2.0 * l_h)
    den = 1.0 + a * r_ohm
    return a / den, (1.0 - a * r_ohm) / den


def series_rc_coeffs(r_ohm, c_f, dt):
    """(g, p1) of a series R-C branch: p1 = dt/(2C), g = 1/(R + p1)."""
    p1 = dt / (2.0 * c_f)
    return 1.0 / (r_ohm + p1), p1


def stamp_element(element, dt, state: BranchState | None = None):
    """Companion stamp of ``element`` for step size ``dt``.

    ``state`` supplies the previous-step branch quantities for single-branch
    elements; composite elements (pi sections, transformers) stamp with zero
    history here and carry full histories inside the compiled system.
    """
    if dt <= 0:
        raise CircuitError(f"dt must be > 0 (got {dt})")
    s = state or BranchState()
    a, b = getattr(element, "node_a", None), getattr(element, "node_b", None)

    if isinstance(element, Resistor):
        return CompanionStamp(_two_node_pattern(a, b, 1.0 / element.r_ohm))

    if isinstance(element, Breaker):
        return CompanionStamp(_two_node_pattern(a, b, element.conductance))

    if isinstance(element, Inductor):
        g, p1 = series_rl_coeffs(0.0, element.l_h, dt)
        h = p1 * s.i + g * s.v
        return CompanionStamp(_two_node_pattern(a, b, g), h, {a: -h, b: h})

    if isinstance(element, Capacitor):
        g, _ = series_rc_coeffs(0.0, element.c_f, dt)
        h = -g * s.v - s.i
        return CompanionStamp(_two_node_pattern(a, b, g), h, {a: -h, b: h})

    if isinstance(element, ShuntReactor):
        r, l = element.impedance
        g, p1 = series_rl_coeffs(r, l, dt)
        h = p1 * s.i + g * s.v
        return CompanionStamp(_two_node_pattern(a, b, g), h, {a: -h, b: h})

    if isinstance(element, RlLoad):
        r, l = element.impedance
        if l == 0.0:
            return CompanionStamp(_two_node_pattern(a, b, 1.0 / r))
        g, p1 = series_rl_coeffs(r, l, dt)
        h = p1 * s.i + g * s.v
        return CompanionStamp(_two_node_pattern(a, b, g), h, {a: -h, b: h})

    if isinstance(element, PiSection):
        g_rl, _ = series_rl_coeffs(element.r_series_ohm, element.l_series_h, dt)
        g_c, _ = series_rc_coeffs(0.0, element.c_shunt_each_end_f, dt)
        entries = _two_node_pattern(a, b, g_rl)
        entries.append((a, a, g_c))
        entries.append((b, b, g_c))
        return CompanionStamp(entries)

    if isinstance(element, TwoWindingTransformer):
        zb = (element.v_lv_kv * 1e3) ** 2 / (element.s_rated_mva * 1e6)
        g, _ = series_rl_coeffs(
            element.r_leak_pu * zb, element.x_leak_pu * zb / OMEGA_BASE, dt
        )
        n = element.ratio
        p, sec = element.node_hv, element.node_lv
        entries = [
            (p, p, g / (n * n)),
            (sec, sec, g),
            (p, sec, -g / n),
            (sec, p, -g / n),
        ]
        l_mag = magnetizing_inductance_si(element)
        entries.append((sec, sec, dt / (2.0 * l_mag)))
        return CompanionStamp(entries)

    if isinstance(element, ControlledVoltageSource):
        return CompanionStamp(_two_node_pattern(a, b, 1.0 / element.r_internal_ohm))

    if isinstance(element, ControlledCurrentSource):
        return CompanionStamp([])

    raise CircuitError(f"no companion stamp for element type {type(element).__name__}")


def magnetizing_inductance_si(tx: TwoWindingTransformer) -> float:
    """Unsaturated magnetizing inductance in henry, referred to the LV winding."""
    zb = (tx.v_lv_kv * 1e3) ** 2 / (tx.s_rated_mva * 1e6)
    if tx.core is None:
        l_pu = tx.mag_l_pu
    else:
        (f0, i0), (f1, i1) = tx.core.knots[0], tx.core.knots[1]
        l_pu = (f1 - f0) / (i1 - i0)
    return l_pu * zb / OMEGA_BASE


def transformer_bases(tx: TwoWindingTransformer):
    """(flux_base_wb_turns, current_base_a_peak) on the LV winding."""
    v_lv = tx.v_lv_kv * 1e3
    lam = math.sqrt(2.0 / 3.0) * v_lv / OMEGA_BASE
    cur = math.sqrt(2.0 / 3.0) * tx.s_rated_mva * 1e6 / v_lv
    return lam, cur
