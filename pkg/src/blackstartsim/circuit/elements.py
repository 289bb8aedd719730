"""Circuit element library: nodes, passive elements, transformers, sources.

All elements are three-phase balanced and described by per-phase parameters.
Shunt elements connect their second terminal to the ground node ``gnd``.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import CircuitError

GROUND = "gnd"

OMEGA_BASE = 2.0 * np.pi * 50.0


@dataclass
class Node:
    """Busbar with a nominal line-to-line RMS voltage in kV."""

    name: str
    nominal_kv: float

    def __post_init__(self):
        if self.name == GROUND:
            raise CircuitError(f"node name {GROUND!r} is reserved for the ground reference")
        if self.nominal_kv <= 0:
            raise CircuitError(f"node {self.name}: nominal_kv must be > 0")


@dataclass
class SaturationCurve:
    """Piecewise-linear magnetizing characteristic in per unit of the owner's base.

    ``knots`` are (flux_linkage_pu, current_pu) pairs, strictly increasing in
    both coordinates, starting at the origin. Negative flux uses the odd
    extension; beyond the last knot the final (air-core) segment slope is
    extrapolated.
    """

    knots: tuple

    def __post_init__(self):
        k = tuple((float(f), float(i)) for f, i in self.knots)
        if len(k) < 2:
            raise CircuitError("saturation curve needs at least two knots")
        if k[0] != (0.0, 0.0):
            raise CircuitError("saturation curve must pass through (0, 0)")
        flux = [p[0] for p in k]
        cur = [p[1] for p in k]
        if any(b <= a for a, b in zip(flux, flux[1:])) or any(
            b <= a for a, b in zip(cur, cur[1:])
        ):
            raise CircuitError("saturation-curve knots must be strictly increasing")
        self.knots = k

    @property
    def air_core_slope(self) -> float:
        """di/dflux of the final segment (inverse of air-core inductance, pu)."""
        (f0, i0), (f1, i1) = self.knots[-2], self.knots[-1]
        return (i1 - i0) / (f1 - f0)


def default_saturation_curve(knee_flux_pu=1.15, l_mag_pu=500.0, l_air_pu=0.3):
    """Two-segment curve: linear magnetizing region up to the knee, then air core."""
    i_knee = knee_flux_pu / l_mag_pu
    f_air = knee_flux_pu + l_air_pu  # second segment spans 1 pu of current
    return SaturationCurve(knots=((0.0, 0.0), (knee_flux_pu, i_knee), (f_air, i_knee + 1.0)))


def magnetizing_current(flux_pu, curve: SaturationCurve):
    """Magnetizing current (pu) at a flux linkage (pu): odd-symmetric piecewise
    interpolation with air-core extrapolation beyond the last knot."""
    flux_arr = np.asarray(flux_pu, dtype=float)
    mag = np.abs(flux_arr)
    fk = np.array([p[0] for p in curve.knots])
    ik = np.array([p[1] for p in curve.knots])
    out = np.interp(mag, fk, ik)
    beyond = mag > fk[-1]
    if np.any(beyond):
        out = np.where(beyond, ik[-1] + (mag - fk[-1]) * curve.air_core_slope, out)
    out = out * np.sign(flux_arr)
    if np.isscalar(flux_pu) or np.ndim(flux_pu) == 0:
        return float(out)
    return out


def _positive(value, what, name):
    if value <= 0:
        raise CircuitError(f"{name}: {what} must be > 0 (got {value})")
    return float(value)


@dataclass
class Resistor:
    name: str
    node_a: str
    node_b: str
    r_ohm: float

    def __post_init__(self):
        self.r_ohm = _positive(self.r_ohm, "r_ohm", self.name)


@dataclass
class Inductor:
    name: str
    node_a: str
    node_b: str
    l_h: float

    def __post_init__(self):
        self.l_h = _positive(self.l_h, "l_h", self.name)


@dataclass
class Capacitor:
    name: str
    node_a: str
    node_b: str
    c_f: float

    def __post_init__(self):
        self.c_f = _positive(self.c_f, "c_f", self.name)


@dataclass
class PiSection:
    """Cable building block: series R-L with half the section charging
    capacitance at each end."""

    name: str
    node_a: str
    node_b: str
    r_series_ohm: float
    l_series_h: float
    c_shunt_each_end_f: float

    def __post_init__(self):
        self.r_series_ohm = _positive(self.r_series_ohm, "r_series_ohm", self.name)
        self.l_series_h = _positive(self.l_series_h, "l_series_h", self.name)
        self.c_shunt_each_end_f = _positive(
            self.c_shunt_each_end_f, "c_shunt_each_end_f", self.name
        )


@dataclass
class ShuntReactor:
    """Compensation reactor sized in Mvar at its nominal line-to-line kV."""

    name: str
    node_a: str
    q_rated_mvar: float
    nominal_kv: float
    x_over_r: float = 200.0
    node_b: str = GROUND

    def __post_init__(self):
        self.q_rated_mvar = _positive(self.q_rated_mvar, "q_rated_mvar", self.name)
        self.nominal_kv = _positive(self.nominal_kv, "nominal_kv", self.name)
        self.x_over_r = _positive(self.x_over_r, "x_over_r", self.name)

    @property
    def impedance(self):
        """(R, L) per phase in SI units."""
        x = (self.nominal_kv * 1e3) ** 2 / (self.q_rated_mvar * 1e6)
        return x / self.x_over_r, x / OMEGA_BASE


@dataclass
class TwoWindingTransformer:
    """Two-winding transformer: leakage branch plus magnetizing branch per phase.

    Leakage r/x are in per unit on the transformer's own MVA/kV base. The
    magnetizing branch sits at the LV terminal; ``core=None`` keeps it linear
    at ``mag_l_pu``, a SaturationCurve makes it saturable.
    """

    name: str
    node_hv: str
    node_lv: str
    s_rated_mva: float
    v_hv_kv: float
    v_lv_kv: float
    r_leak_pu: float
    x_leak_pu: float
    core: SaturationCurve | None = None
    mag_l_pu: float = 500.0

    def __post_init__(self):
        for what in ("s_rated_mva", "v_hv_kv", "v_lv_kv", "r_leak_pu", "x_leak_pu", "mag_l_pu"):
            setattr(self, what, _positive(getattr(self, what), what, self.name))

    @property
    def ratio(self) -> float:
        return self.v_hv_kv / self.v_lv_kv


@dataclass
class Breaker:
    """Ideal-ish breaker: conductance swap between open and closed values."""

    name: str
    node_a: str
    node_b: str
    closed: bool = False
    g_open_s: float = 1e-6
    g_closed_s: float = 1e6

    def __post_init__(self):
        self.g_open_s = _positive(self.g_open_s, "g_open_s", self.name)
        self.g_closed_s = _positive(self.g_closed_s, "g_closed_s", self.name)

    @property
    def conductance(self) -> float:
        return self.g_closed_s if self.closed else self.g_open_s


@dataclass
class RlLoad:
    """Constant-impedance load drawing p_rated/q_rated at its nominal kV."""

    name: str
    node_a: str
    p_rated_mw: float
    nominal_kv: float
    q_rated_mvar: float = 0.0
    node_b: str = GROUND

    def __post_init__(self):
        self.p_rated_mw = _positive(self.p_rated_mw, "p_rated_mw", self.name)
        self.nominal_kv = _positive(self.nominal_kv, "nominal_kv", self.name)
        if self.q_rated_mvar < 0:
            raise CircuitError(f"{self.name}: q_rated_mvar must be >= 0")
        self.q_rated_mvar = float(self.q_rated_mvar)

    @property
    def impedance(self):
        """(R, L) per phase in SI units (series representation)."""
        v2 = (self.nominal_kv * 1e3) ** 2
        p = self.p_rated_mw * 1e6
        q = self.q_rated_mvar * 1e6
        s2 = p * p + q * q
        r = v2 * p / s2
        l = v2 * q / s2 / OMEGA_BASE
        return r, l


@dataclass
class ControlledVoltageSource:
    """Converter attachment point: per-phase instantaneous voltage setpoint
    behind a small internal resistance (Norton equivalent in the nodal matrix)."""

    name: str
    node_a: str
    r_internal_ohm: float = 1e-3
    node_b: str = GROUND

    def __post_init__(self):
        self.r_internal_ohm = _positive(self.r_internal_ohm, "r_internal_ohm", self.name)


@dataclass
class ControlledCurrentSource:
    """Converter attachment point: per-phase instantaneous current injection."""

    name: str
    node_a: str
    node_b: str = GROUND


ELEMENT_TYPES = (
    Resistor,
    Inductor,
    Capacitor,
    PiSection,
    ShuntReactor,
    TwoWindingTransformer,
    Breaker,
    RlLoad,
    ControlledVoltageSource,
    ControlledCurrentSource,
)
