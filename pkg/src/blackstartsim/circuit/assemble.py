"""Compile a Network into the solvable nodal system and step it.

The assembled system keeps one N x N per-phase conductance matrix (phases are
balanced and uncoupled, so three right-hand-side columns share one inverse) and
struct-of-array branch tables sorted by kind for the stepping kernels.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .. import _kernels as K
from ..errors import CircuitError, SingularNetworkError, SolverDivergedError
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
from .network import Network
from .stamps import (
    magnetizing_inductance_si,
    series_rc_coeffs,
    series_rl_coeffs,
    transformer_bases,
)

log = logging.getLogger(__name__)


@dataclass
class NetworkState:
    """Snapshot of solver state: time plus node voltages and element states."""

    time_s: float
    node_voltages: dict      # node name -> (3,) volts
    branch_currents: dict    # branch name -> (3,) amperes
    branch_aux: dict         # branch name -> (3,) capacitor volts / flux linkages


class _BranchSpec:
    __slots__ = ("kind", "name", "na", "nb", "g", "p1", "ratio", "satidx")

    def __init__(self, kind, name, na, nb, g, p1=0.0, ratio=1.0, satidx=0):
        self.kind = kind
        self.name = name
        self.na = na
        self.nb = nb
        self.g = g
        self.p1 = p1
        self.ratio = ratio
        self.satidx = satidx


class CompiledSystem:
    """Factorized nodal system with mutable branch/node state.

    Reusable until the next topology event; ``set_breaker`` swaps the breaker
    conductance in place and refactorizes.
    """

    def __init__(self, network: Network, dt: float):
        if dt <= 0:
            raise CircuitError(f"dt must be > 0 (got {dt})")
        network.validate()
        self.network = network
        self.dt = float(dt)
        self.node_order = list(network.nodes)
        self.index = {name: i for i, name in enumerate(self.node_order)}
        self.n = len(self.node_order)
        self.step_count = 0
        self.event_log = []

        self._build_branches()
        self._check_connectivity()
        self._build_matrix()
        self._alloc_state()

    # -- construction ------------------------------------------------------

    def _node_idx(self, name):
        return self.n if name == GROUND else self.index[name]

    def _build_branches(self):
        dt = self.dt
        specs = []
        self._sat_curves = []
        self.breaker_branch = {}
        self.vsource_nodes = {}
        self.isource_nodes = {}

        def add(kind, name, na, nb, g, p1=0.0, ratio=1.0, satidx=0):
            specs.append(
                _BranchSpec(kind, name, self._node_idx(na), self._node_idx(nb), g, p1, ratio, satidx)
            )

        for el in self.network.elements.values():
            if isinstance(el, Resistor):
                add(K.KIND_RES, el.name, el.node_a, el.node_b, 1.0 / el.r_ohm)
            elif isinstance(el, Breaker):
                add(K.KIND_RES, el.name, el.node_a, el.node_b, el.conductance)
                self.breaker_branch[el.name] = len(specs) - 1
            elif isinstance(el, Inductor):
                g, p1 = series_rl_coeffs(0.0, el.l_h, dt)
                add(K.KIND_RL, el.name, el.node_a, el.node_b, g, p1)
            elif isinstance(el, ShuntReactor):
                r, l = el.impedance
                g, p1 = series_rl_coeffs(r, l, dt)
                add(K.KIND_RL, el.name, el.node_a, el.node_b, g, p1)
            elif isinstance(el, RlLoad):
                r, l = el.impedance
                if l == 0.0:
                    add(K.KIND_RES, el.name, el.node_a, el.node_b, 1.0 / r)
                else:
                    g, p1 = series_rl_coeffs(r, l, dt)
                    add(K.KIND_RL, el.name, el.node_a, el.node_b, g, p1)
            elif isinstance(el, Capacitor):
                g, p1 = series_rc_coeffs(0.0, el.c_f, dt)
                add(K.KIND_RC, el.name, el.node_a, el.node_b, g, p1)
            elif isinstance(el, PiSection):
                g, p1 = series_rl_coeffs(el.r_series_ohm, el.l_series_h, dt)
                add(K.KIND_RL, el.name + ".series", el.node_a, el.node_b, g, p1)
                gc, pc = series_rc_coeffs(0.0, el.c_shunt_each_end_f, dt)
                add(K.KIND_RC, el.name + ".shunt_a", el.node_a, GROUND, gc, pc)
                add(K.KIND_RC, el.name + ".shunt_b", el.node_b, GROUND, gc, pc)
            elif isinstance(el, TwoWindingTransformer):
                zb = (el.v_lv_kv * 1e3) ** 2 / (el.s_rated_mva * 1e6)
                g, p1 = series_rl_coeffs(
                    el.r_leak_pu * zb, el.x_leak_pu * zb / OMEGA_BASE, dt
                )
                add(K.KIND_XFMR, el.name + ".leak", el.node_hv, el.node_lv, g, p1, el.ratio)
                lam_b, cur_b = transformer_bases(el)
                l_mag = magnetizing_inductance_si(el)
                if el.core is None:
                    flux = np.array([0.0, lam_b])
                    cur = np.array([0.0, lam_b / l_mag])
                    slope = 1.0 / l_mag
                else:
                    flux = np.array([p[0] for p in el.core.knots]) * lam_b
                    cur = np.array([p[1] for p in el.core.knots]) * cur_b
                    slope = el.core.air_core_slope * cur_b / lam_b
                self._sat_curves.append((flux, cur, slope))
                add(
                    K.KIND_MAG, el.name + ".mag", el.node_lv, GROUND,
                    dt / (2.0 * l_mag), dt / 2.0, 1.0, len(self._sat_curves) - 1,
                )
            elif isinstance(el, ControlledVoltageSource):
                add(K.KIND_RES, el.name + ".gsrc", el.node_a, el.node_b, 1.0 / el.r_internal_ohm)
                self.vsource_nodes[el.name] = (
                    self._node_idx(el.node_a), 1.0 / el.r_internal_ohm
                )
            elif isinstance(el, ControlledCurrentSource):
                self.isource_nodes[el.name] = (
                    self._node_idx(el.node_a), self._node_idx(el.node_b)
                )
            else:  # pragma: no cover - Network.add rejects unknown types
                raise CircuitError(f"cannot compile element {type(el).__name__}")

        specs.sort(key=lambda s: s.kind)  # stable: per-kind contiguous slices
        self.branch_names = [s.name for s in specs]
        self.branch_index = {s.name: i for i, s in enumerate(specs)}
        self.breaker_branch = {
            name: self.branch_index[name] for name in self.breaker_branch
        }
        self.nbr = len(specs)
        self.kind = np.array([s.kind for s in specs], dtype=np.int64)
        self.na = np.array([s.na for s in specs], dtype=np.int64)
        self.nb = np.array([s.nb for s in specs], dtype=np.int64)
        self.g = np.array([s.g for s in specs], dtype=np.float64)
        self.p1 = np.array([s.p1 for s in specs], dtype=np.float64)
        self.ratio = np.array([s.ratio for s in specs], dtype=np.float64)
        satidx = np.array([s.satidx for s in specs], dtype=np.int64)
        self.satidx = satidx

        self.off = np.zeros(K.N_KINDS + 1, dtype=np.int64)
        for k in range(K.N_KINDS):
            self.off[k + 1] = self.off[k] + int(np.sum(self.kind == k))

        ncur = max(1, len(self._sat_curves))
        kmax = max([2] + [len(c[0]) for c in self._sat_curves])
        self.satflux = np.zeros((ncur, kmax))
        self.satcur = np.zeros((ncur, kmax))
        self.satnk = np.full(ncur, 2, dtype=np.int64)
        self.satslope = np.ones(ncur)
        self.satflux[:, 1] = 1.0
        self.satcur[:, 1] = 1.0
        for i, (flux, cur, slope) in enumerate(self._sat_curves):
            self.satflux[i, : len(flux)] = flux
            self.satcur[i, : len(cur)] = cur
            self.satnk[i] = len(flux)
            self.satslope[i] = slope

    def _iter_edges(self):
        for b in range(self.nbr):
            yield int(self.na[b]), int(self.nb[b])

    def _check_connectivity(self):
        """Every node must reach ground through branch conductances."""
        adj = [[] for _ in range(self.n + 1)]
        for a, b in self._iter_edges():
            adj[a].append(b)
            adj[b].append(a)
        seen = [False] * (self.n + 1)
        stack = [self.n]  # ground
        seen[self.n] = True
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        floating = [self.node_order[i] for i in range(self.n) if not seen[i]]
        if floating:
            raise SingularNetworkError(floating)

    def _build_matrix(self):
        n = self.n
        G = np.zeros((n, n))

        def put(i, j, g):
            if i < n and j < n:
                G[i, j] += g

        for b in range(self.nbr):
            a, c = int(self.na[b]), int(self.nb[b])
            g = self.g[b]
            if self.kind[b] == K.KIND_XFMR:
                r = self.ratio[b]
                put(a, a, g / (r * r))
                put(c, c, g)
                put(a, c, -g / r)
                put(c, a, -g / r)
            else:
                put(a, a, g)
                put(c, c, g)
                put(a, c, -g)
                put(c, a, -g)
        self.g_matrix = G
        self._refactor()

    def _refactor(self):
        try:
            self.ginv = np.linalg.inv(self.g_matrix)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - BFS catches first
            raise SingularNetworkError(self.node_order) from exc

    def _alloc_state(self):
        self.v = np.zeros((self.n + 1, 3))
        self.ibr = np.zeros((self.nbr, 3))
        self.aux = np.zeros((self.nbr, 3))
        self.inj = np.zeros((self.n, 3))
        self._rhs = np.zeros((self.n, 3))
        self._vnew = np.zeros((self.n, 3))
        self._vbr0 = np.zeros((self.nbr, 3))
        self._hbr = np.zeros((self.nbr, 3))

    # -- public surface ----------------------------------------------------

    @property
    def dimension(self) -> int:
        """Number of solved unknowns: three phases per non-ground node."""
        return 3 * self.n

    @property
    def time_s(self) -> float:
        return self.step_count * self.dt

    def net_arrays(self) -> K.NetArrays:
        return K.NetArrays(
            ginv=self.ginv, off=self.off, na=self.na, nb=self.nb, g=self.g,
            p1=self.p1, ratio=self.ratio, satflux=self.satflux, satcur=self.satcur,
            satnk=self.satnk, satslope=self.satslope, satidx=self.satidx,
            v=self.v, ibr=self.ibr, aux=self.aux, inj=self.inj,
            rhs=self._rhs, vnew=self._vnew, vbr0=self._vbr0, hbr=self._hbr,
        )

    def node_voltage(self, name):
        return self.v[self._node_idx(name)]

    def branch_current(self, name):
        return self.ibr[self.branch_index[name]]

    def branch_flux(self, name):
        return self.aux[self.branch_index[name]]

    def node_peak_base(self, name) -> float:
        """Peak phase-to-ground voltage at 1 pu (sqrt(2/3) * kV_LL)."""
        return math.sqrt(2.0 / 3.0) * self.network.nodes[name].nominal_kv * 1e3

    def set_vsource(self, name, v_abc):
        """Per-phase instantaneous voltage setpoint of a controlled source."""
        node, gsrc = self.vsource_nodes[name]
        self.inj[node, :] = gsrc * np.asarray(v_abc, dtype=float)

    def set_isource(self, name, i_abc):
        node_a, node_b = self.isource_nodes[name]
        i = np.asarray(i_abc, dtype=float)
        if node_a < self.n:
            self.inj[node_a, :] = i
        if node_b < self.n:
            self.inj[node_b, :] = -i

    def set_breaker(self, name, closed: bool, time_s=None):
        """Swap a breaker's conductance and refactorize. No-op with a warning
        when the breaker is already in the requested state."""
        breaker = self.network.breaker(name)
        t = self.time_s if time_s is None else time_s
        if breaker.closed == closed:
            log.warning("breaker %s already %s at t=%gs; ignoring",
                        name, "closed" if closed else "open", t)
            self.event_log.append((t, name, closed, "noop"))
            return
        b = self.breaker_branch[name]
        old_g = self.g[b]
        breaker.closed = closed
        new_g = breaker.conductance
        self.g[b] = new_g
        dg = new_g - old_g
        i, j = int(self.na[b]), int(self.nb[b])
        n = self.n
        if i < n:
            self.g_matrix[i, i] += dg
        if j < n:
            self.g_matrix[j, j] += dg
        if i < n and j < n:
            self.g_matrix[i, j] -= dg
            self.g_matrix[j, i] -= dg
        self._refactor()
        self.event_log.append((t, name, closed, "applied"))

    def state(self) -> NetworkState:
        volts = {name: self.v[i].copy() for name, i in self.index.items()}
        volts[GROUND] = self.v[self.n].copy()
        currents = {name: self.ibr[i].copy() for name, i in self.branch_index.items()}
        aux = {name: self.aux[i].copy() for name, i in self.branch_index.items()}
        return NetworkState(self.time_s, volts, currents, aux)

    def step(self, injections=None):
        """Advance one step with optional {node: (3,) amps} source injections."""
        if injections:
            self.inj[:] = 0.0
            for name, i_abc in injections.items():
                idx = self._node_idx(name)
                if idx < self.n:
                    self.inj[idx] += np.asarray(i_abc, dtype=float)
        status = K._circuit_substep_numpy(self.net_arrays())
        self.step_count += 1
        if status != K.STATUS_DONE:
            raise SolverDivergedError(self.step_count, self.time_s)
        return self


def assemble_system(network: Network, dt: float) -> CompiledSystem:
    """Build and factorize the nodal system for the current topology."""
    return CompiledSystem(network, dt)


def solve_step(system: CompiledSystem, injections=None) -> NetworkState:
    """One trapezoidal step; returns the new NetworkState snapshot."""
    system.step(injections)
    return system.state()


def apply_switch_event(system: CompiledSystem, breaker_id: str, closed: bool, time_s=None):
    """Public breaker operation: conductance swap + refactorization + log."""
    system.set_breaker(breaker_id, closed, time_s)
    return system
