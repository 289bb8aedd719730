"""Companion-stamp unit checks: the closed-form conductances and history
currents, pattern symmetry, and rejection of degenerate parameters."""

import numpy as np
import pytest

from blackstartsim.circuit import (
    Breaker,
    BranchState,
    Capacitor,
    ControlledCurrentSource,
    ControlledVoltageSource,
    Inductor,
    PiSection,
    Resistor,
    RlLoad,
    ShuntReactor,
    TwoWindingTransformer,
    stamp_element,
)
from blackstartsim.errors import CircuitError


def test_inductor_conductance():
    # G = dt / (2 L)
    stamp = stamp_element(Inductor("l", "a", "b", 1e-3), dt=50e-6)
    assert stamp.conductance() == pytest.approx(0.025)


def test_resistor_conductance_and_no_history():
    stamp = stamp_element(Resistor("r", "a", "b", 2.0), dt=50e-6)
    assert stamp.conductance() == pytest.approx(0.5)
    assert stamp.history_branch == 0.0
    assert not stamp.history_injections


def test_capacitor_history_current():
    # G = 2C/dt; h = -(2C/dt) v_prev - i_prev
    state = BranchState(i=0.0, v=100.0)
    stamp = stamp_element(Capacitor("c", "a", "gnd", 1e-6), dt=50e-6, state=state)
    assert stamp.conductance() == pytest.approx(0.04)
    assert stamp.history_branch == pytest.approx(-4.0)
    assert stamp.history_injections["a"] == pytest.approx(4.0)


def test_capacitor_one_step_rc_response():
    # one trapezoidal step of a charged RC loop matches the update equation;
    # consistent initial state: cap charging current i0 = -v0/r
    r, c, dt, v0 = 2.0, 1e-6, 50e-6, 100.0
    g_c = 2 * c / dt
    state = BranchState(i=-v0 / r, v=v0)
    stamp = stamp_element(Capacitor("c", "a", "gnd", c), dt=dt, state=state)
    # nodal: (1/r + g_c) v1 = -h
    v1 = -stamp.history_branch / (1 / r + g_c)
    v1_hand = v0 * (1 - dt / (2 * r * c)) / (1 + dt / (2 * r * c))
    assert v1 == pytest.approx(v1_hand, rel=1e-12)


def test_dt_must_be_positive():
    with pytest.raises(CircuitError):
        stamp_element(Resistor("r", "a", "b", 1.0), dt=0.0)


@pytest.mark.parametrize("bad", [
    lambda: Inductor("l", "a", "b", 0.0),
    lambda: Capacitor("c", "a", "b", -1e-6),
    lambda: Resistor("r", "a", "b", 0.0),
    lambda: PiSection("p", "a", "b", 0.0, 1e-3, 1e-6),
])
def test_degenerate_elements_rejected(bad):
    with pytest.raises(CircuitError):
        bad()


def _all_elements():
    return [
        Resistor("r", "a", "b", 2.0),
        Inductor("l", "a", "b", 1e-3),
        Capacitor("c", "a", "b", 1e-6),
        PiSection("pi", "a", "b", 0.3, 4e-3, 1e-6),
        ShuntReactor("sr", "a", 190.0, 220.0),
        TwoWindingTransformer("tx", "a", "b", 475.0, 400.0, 220.0, 0.002, 0.12),
        Breaker("bk", "a", "b", closed=True),
        RlLoad("ld", "a", 20.0, 400.0, 5.0),
        ControlledVoltageSource("vs", "a"),
        ControlledCurrentSource("is", "a"),
    ]


@pytest.mark.parametrize("element", _all_elements(), ids=lambda e: e.name)
def test_stamp_pattern_symmetric(element):
    stamp = stamp_element(element, dt=50e-6)
    acc = {}
    for i, j, g in stamp.conductances:
        acc[(i, j)] = acc.get((i, j), 0.0) + g
    for (i, j), g in acc.items():
        assert acc.get((j, i), 0.0) == pytest.approx(g, rel=1e-12), (i, j)


def test_transformer_stamp_has_leakage_and_magnetizing():
    tx = TwoWindingTransformer("tx", "hv", "lv", 475.0, 400.0, 220.0, 0.002, 0.12)
    stamp = stamp_element(tx, dt=50e-6)
    diag_lv = sum(g for i, j, g in stamp.conductances if i == j == "lv")
    offdiag = [g for i, j, g in stamp.conductances if i != j]
    # LV diagonal = leakage + magnetizing > |coupling| * ratio refl.
    assert diag_lv > 0
    assert len(offdiag) == 2
    n = tx.ratio
    g_leak = -offdiag[0] * n
    assert diag_lv == pytest.approx(g_leak + (diag_lv - g_leak))
