"""Command-line front end: run scenarios, compare runs, dump and validate
scenario files.

Exit codes: 0 = clean run, 1 = failure (bad configuration, parse error or
solver divergence), 2 = run completed with limit violations.
"""

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from .. import __version__
from ..circuit.timeseries import TimeSeries
from ..errors import BlackstartError
from ..measure.limits import check_limits
from ..scenario.case import build_default_case
from ..scenario.runner import apply_toggles, run_case
from ..scenario.schedule import (
    ENERGISE_BLOCK_LOAD,
    SYNCHROCHECK_ARM,
    Event,
    EventSchedule,
    default_schedule,
    hard_switch_schedule,
)
from .runconfig import BUILTIN_SCENARIOS, RunConfig
from .scenario_format import parse_scenario, serialize_scenario


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep the {0,1,2} exit-code contract
        raise _CliError(message)


def load_builtin(name: str, resync: bool = False):
    if name == "default-blackstart":
        case = build_default_case(with_external_grid=resync)
        return case, default_schedule()
    if name == "hard-switch":
        case = build_default_case(with_external_grid=resync)
        return case, hard_switch_schedule()
    raise _CliError(
        f"unknown scenario {name!r}: not a file and not one of {BUILTIN_SCENARIOS}"
    )


def load_scenario(spec: str, resync: bool = False):
    """Resolve a scenario path or built-in name into (case, schedule, config)."""
    path = Path(spec)
    if path.exists():
        case, schedule, config = parse_scenario(path.read_text())
        config.scenario = spec
        return case, schedule, config
    case, schedule = load_builtin(spec, resync)
    return case, schedule, RunConfig(scenario=spec)


def _ensure_arm_event(schedule: EventSchedule) -> EventSchedule:
    if any(e.action == SYNCHROCHECK_ARM for e in schedule.events):
        return schedule
    t_load = max(
        (e.time_s for e in schedule.events if e.action == ENERGISE_BLOCK_LOAD),
        default=max((e.time_s for e in schedule.events), default=0.0),
    )
    events = schedule.events + [Event(t_load + 1.0, SYNCHROCHECK_ARM)]
    return EventSchedule(events=events, initial_breakers=schedule.initial_breakers,
                         duration_s=max(schedule.duration_s, t_load + 1.0))


def prepare(case, schedule, config: RunConfig):
    """Apply configuration toggles to a loaded scenario."""
    if not config.saturation or config.current_limiter:
        case = apply_toggles(case, saturation=config.saturation,
                             current_limiter=config.current_limiter)
    if config.resync:
        if case.tie_breaker is None:
            raise _CliError(
                "re-sync enabled but the case has no external grid / tie breaker"
            )
        schedule = _ensure_arm_event(schedule)
    last_event = max((e.time_s for e in schedule.events), default=0.0)
    config.validate(last_event)
    return case, schedule


def _write_violations(path: Path, report, stages):
    lines = [f"# violation report: {len(report)} violation(s)"]
    for v in report.violations:
        lines.append("# " + v.as_line())
    for n, v in enumerate(report.violations, 1):
        lines.append(f"violation.{n}.signal = {v.signal}")
        lines.append(f"violation.{n}.start_s = {v.start_s!r}")
        lines.append(f"violation.{n}.end_s = {v.end_s!r}")
        lines.append(f"violation.{n}.worst = {v.worst!r}")
        lines.append(f"violation.{n}.limit = {v.limit!r}")
        lines.append(f"violation.{n}.stage = {v.stage}")
    path.write_text("\n".join(lines) + "\n")


def _write_stages(path: Path, stages, events):
    lines = ["# stage transitions"]
    for t, name in stages.log:
        lines.append(f"stage.{name} = {t!r}")
    lines.append("# switching events (applied)")
    for n, (t, name, closed, status) in enumerate(events, 1):
        lines.append(f"event.{n}.time_s = {t!r}")
        lines.append(f"event.{n}.breaker = {name}")
        lines.append(f"event.{n}.closed = {'true' if closed else 'false'}")
        lines.append(f"event.{n}.status = {status}")
    path.write_text("\n".join(lines) + "\n")


def run_command(args) -> int:
    case, schedule, config = load_scenario(args.scenario)
    if args.dt is not None:
        config.dt_s = args.dt
    if args.duration is not None:
        config.duration_s = args.duration
    if args.decimate is not None:
        config.decimation = args.decimate
    if args.no_saturation:
        config.saturation = False
    if args.current_limiter:
        config.current_limiter = True
    if args.enable_resync:
        config.resync = True
    config.out_dir = args.out
    config.backend = args.backend

    # re-sync on a built-in name needs the grid variant of the case
    if config.resync and not Path(args.scenario).exists():
        case, schedule = load_builtin(args.scenario, resync=True)
    case, schedule = prepare(case, schedule, config)

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    result = run_case(case, schedule, dt=config.dt_s, decimation=config.decimation,
                      backend=config.backend, duration_s=config.duration_s)
    wall = time.time() - t0

    ts = result.ts
    ts.write_csv(out / "timeseries.csv")

    window = schedule.soft_charge_window()
    settle = (window[1] if window else 0.0) + 0.04
    kv_by_node = {n.name: n.nominal_kv for n in case.nodes}
    bases = {}
    if case.v_reg_node in case.monitor_nodes:
        bases[f"v_{case.v_reg_node}"] = kv_by_node[case.v_reg_node]
    report = check_limits(
        ts, config.envelope, stage_log=result.stages.log,
        voltage_waveform_bases=bases, settle_s=settle,
    )
    _write_violations(out / "violations.txt", report, result.stages)
    _write_stages(out / "stages.txt", result.stages, result.run.events)

    manifest = [
        f"# manifest: blackstartsim {__version__}",
        f"# wall_s: {wall:.3f}",
        f"# backend: {result.run.backend}",
        f"# violations: {len(report)}",
        "",
        serialize_scenario(case, schedule, config),
    ]
    (out / "manifest.txt").write_text("\n".join(manifest))

    print(f"run complete: {ts.data.shape[0]} samples x {len(ts.names)} channels "
          f"in {wall:.1f} s ({result.run.backend})")
    print(f"stages: {' -> '.join(name for _, name in result.stages.log) or 'Dead'}")
    if result.run.sync_closed_at is not None:
        print(f"tie breaker closed at {result.run.sync_closed_at:.4f} s")
    if report.clean:
        print("violations: none")
        return 0
    print(f"violations: {len(report)}")
    for v in report.violations:
        print("  " + v.as_line())
    return 2


def _steady(x):
    n = max(1, len(x) // 10)
    return float(np.mean(x[-n:]))


def compare_command(args) -> int:
    a = TimeSeries.read_csv(Path(args.run_a) / "timeseries.csv")
    b = TimeSeries.read_csv(Path(args.run_b) / "timeseries.csv")
    common = [n for n in a.names if n in b._index and n != "time"]
    if not common:
        raise _CliError("runs share no channels")
    missing = [n for n in a.names if n not in b._index]
    notes = []
    if missing:
        notes.append(f"channels only in run A: {', '.join(missing)}")

    ta, tb = a.time, b.time
    resampled = False
    if len(ta) != len(tb) or not np.array_equal(ta, tb):
        resampled = True
        t_common = ta if ta[-1] - ta[0] <= tb[-1] - tb[0] else tb
        if len(ta) > len(tb):
            t_common = tb

    lines = [f"# comparison: {args.run_a} vs {args.run_b}"]
    if resampled:
        lines.append("# time grids differ; compared on the coarser common grid")
    for note in notes:
        lines.append("# " + note)
    rows = []
    for name in common:
        xa, xb = a.channel(name), b.channel(name)
        if resampled:
            xa = np.interp(t_common, ta, xa)
            xb = np.interp(t_common, tb, xb)
        rows.append((name, float(np.max(np.abs(xa))), float(np.max(np.abs(xb))),
                     _steady(xa), _steady(xb)))
    for name, pa, pb, sa, sb in rows:
        lines.append(
            f"channel.{name} = peakA {pa!r} | peakB {pb!r} | dpeak {pb - pa!r} | "
            f"steadyA {sa!r} | steadyB {sb!r} | dsteady {sb - sa!r}"
        )

    def peak(ts_, name):
        x = ts_.channel(name)
        if resampled:
            x = np.interp(t_common, ts_.time, x)
        return float(np.max(np.abs(x)))

    headline = []
    if "env_bess_i" in a and "env_bess_i" in b._index:
        ia, ib = peak(a, "env_bess_i"), peak(b, "env_bess_i")
        headline.append(f"peak battery current: A {ia:.3f} pu, B {ib:.3f} pu, "
                        f"ratio B/A {ib / ia if ia else math.inf:.2f}")
    if "bess_v_rms" in a and "bess_v_rms" in b._index:
        def worst(ts_):
            x = ts_.channel("bess_v_rms")
            m = ts_.time >= 0.6
            return float(np.max(np.abs(x[m] - 1.0))) if m.any() else math.nan
        headline.append(f"worst voltage excursion from 1 pu: A {worst(a):.4f}, "
                        f"B {worst(b):.4f}")
    for h in headline:
        lines.append("# " + h)
        print(h)

    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "comparison.txt").write_text("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    return 0


def print_case_command(args) -> int:
    case, schedule = load_builtin(args.name, resync=args.enable_resync)
    config = RunConfig(scenario=args.name, resync=args.enable_resync)
    sys.stdout.write(serialize_scenario(case, schedule, config))
    return 0


def validate_command(args) -> int:
    text = Path(args.scenario).read_text()
    case, schedule, config = parse_scenario(text)
    print(f"ok: {case.name!r}, {len(case.nodes)} nodes, {len(case.elements)} "
          f"elements, {len(schedule.events)} events")
    return 0


def build_parser():
    p = _Parser(prog="blackstartsim",
                description="Fixed-step EMT black-start simulator")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario and write artifacts")
    run_p.add_argument("--scenario", default="default-blackstart",
                       help="scenario file path or built-in name")
    run_p.add_argument("--dt", type=float, default=None, help="step size [s]")
    run_p.add_argument("--duration", type=float, default=None, help="run length [s]")
    run_p.add_argument("--out", default="out", help="output directory")
    run_p.add_argument("--decimate", type=int, default=None,
                       help="channel decimation factor")
    run_p.add_argument("--no-saturation", action="store_true",
                       help="strip transformer saturation")
    run_p.add_argument("--current-limiter", action="store_true",
                       help="arm the battery current limiter")
    run_p.add_argument("--enable-resync", action="store_true",
                       help="add the external grid and arm the synchrocheck")
    run_p.add_argument("--backend", choices=("numba", "numpy"), default=None)
    run_p.set_defaults(func=run_command)

    cmp_p = sub.add_parser("compare", help="compare two completed run directories")
    cmp_p.add_argument("run_a")
    cmp_p.add_argument("run_b")
    cmp_p.add_argument("--out", default=None)
    cmp_p.set_defaults(func=compare_command)

    pc = sub.add_parser("print-case", help="dump a built-in scenario file")
    pc.add_argument("name", choices=BUILTIN_SCENARIOS)
    pc.add_argument("--enable-resync", action="store_true")
    pc.set_defaults(func=print_case_command)

    val = sub.add_parser("validate", help="parse and validate a scenario file")
    val.add_argument("--scenario", required=True)
    val.set_defaults(func=validate_command)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BlackstartError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
