"""Scenario file format: round trips, line-numbered rejection of unknown keys,
and semantic validation."""

import pytest

from blackstartsim.cli import RunConfig, parse_scenario, serialize_scenario
from blackstartsim.errors import ScenarioFormatError
from blackstartsim.scenario import build_default_case, default_schedule, hard_switch_schedule


@pytest.fixture
def default_text():
    return serialize_scenario(build_default_case(), default_schedule(), RunConfig())


def test_round_trip_is_structural_identity(default_text):
    case, schedule, config = parse_scenario(default_text)
    assert case == build_default_case()
    assert schedule == default_schedule()
    assert serialize_scenario(case, schedule, config) == default_text


def test_round_trip_with_grid_and_hard_switch():
    case = build_default_case(with_external_grid=True)
    schedule = hard_switch_schedule()
    text = serialize_scenario(case, schedule, RunConfig(resync=True))
    case2, schedule2, config2 = parse_scenario(text)
    assert case2 == case
    assert schedule2 == schedule
    assert config2.resync is True


def test_unknown_key_rejected_with_line_number(default_text):
    lines = default_text.splitlines()
    lines.insert(5, "bogus.key = 1")
    with pytest.raises(ScenarioFormatError) as exc:
        parse_scenario("\n".join(lines))
    assert "line 6" in str(exc.value)
    assert "bogus.key" in str(exc.value)


def test_unknown_element_param_rejected(default_text):
    text = default_text + "element.tx_grid.frobnicate = 3\n"
    with pytest.raises(ScenarioFormatError) as exc:
        parse_scenario(text)
    assert "frobnicate" in str(exc.value)


def test_dangling_node_reference(default_text):
    text = default_text.replace(
        "element.reactor_on.nodes = bus220on,gnd",
        "element.reactor_on.nodes = nowhere,gnd",
    )
    with pytest.raises(ScenarioFormatError) as exc:
        parse_scenario(text)
    assert "nowhere" in str(exc.value)


def test_negative_parameter_rejected(default_text):
    text = default_text.replace(
        "element.reactor_on.q_rated_mvar = 190.0",
        "element.reactor_on.q_rated_mvar = -190.0",
    )
    with pytest.raises(ScenarioFormatError):
        parse_scenario(text)


def test_event_with_unknown_breaker(default_text):
    text = default_text + (
        "event.99.time_s = 24.0\nevent.99.action = close_breaker\n"
        "event.99.target = brk_missing\n"
    )
    with pytest.raises(ScenarioFormatError) as exc:
        parse_scenario(text)
    assert "brk_missing" in str(exc.value)


def test_event_with_unknown_wt(default_text):
    text = default_text + (
        "event.99.time_s = 24.0\nevent.99.action = enable_wt\n"
        "event.99.target = wt99\n"
    )
    with pytest.raises(ScenarioFormatError) as exc:
        parse_scenario(text)
    assert "wt99" in str(exc.value)


def test_malformed_line_rejected():
    with pytest.raises(ScenarioFormatError) as exc:
        parse_scenario("this is not a key value pair\n")
    assert "line 1" in str(exc.value)


def test_missing_required_case_key(default_text):
    text = "\n".join(l for l in default_text.splitlines()
                     if not l.startswith("case.bess_source"))
    with pytest.raises(ScenarioFormatError) as exc:
        parse_scenario(text)
    assert "bess_source" in str(exc.value)
