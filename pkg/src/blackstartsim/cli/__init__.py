"""Command-line front end and scenario file format."""

from .main import main
from .runconfig import BUILTIN_SCENARIOS, RunConfig
from .scenario_format import parse_scenario, serialize_scenario

__all__ = ["BUILTIN_SCENARIOS", "RunConfig", "main", "parse_scenario", "serialize_scenario"]
