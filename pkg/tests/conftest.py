"""Shared fixtures: the reference runs are expensive, so each variant runs
once per session and is reused across test modules."""

import numpy as np
import pytest

from blackstartsim.scenario import (
    apply_toggles,
    build_default_case,
    default_schedule,
    hard_switch_schedule,
    run_case,
)


@pytest.fixture(scope="session")
def default_run():
    return run_case(build_default_case(), default_schedule())


@pytest.fixture(scope="session")
def hard_switch_run():
    return run_case(build_default_case(), hard_switch_schedule())


@pytest.fixture(scope="session")
def hard_switch_nosat_run():
    case = apply_toggles(build_default_case(), saturation=False)
    return run_case(case, hard_switch_schedule())


class Probe:
    """Channel access helpers over a ScenarioResult."""

    def __init__(self, result):
        self.result = result
        self.ts = result.ts
        self.t = result.ts.time

    def seg(self, t0, t1):
        return (self.t >= t0) & (self.t < t1)

    def at(self, tt):
        return int(np.argmin(np.abs(self.t - tt)))

    def ch(self, name):
        return self.ts.channel(name)


@pytest.fixture(scope="session")
def default_probe(default_run):
    return Probe(default_run)


@pytest.fixture(scope="session")
def hard_probe(hard_switch_run):
    return Probe(hard_switch_run)


@pytest.fixture(scope="session")
def hard_nosat_probe(hard_switch_nosat_run):
    return Probe(hard_switch_nosat_run)
