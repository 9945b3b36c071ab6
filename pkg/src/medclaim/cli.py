"""Command line entry point.

Subcommands:
  validate  check an envelope document file against the wire schema
  simulate  run a claim scenario through a fresh in-process platform
  compare   contrast shared-service and per-type registry topologies
  seed      parse a fixture file and report what it defines
  serve     run the HTTP gateway
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import envelope as ev
from .config import ConfigError, load_config
from .orchestrator import (InvalidArgument, ScenarioParseError,
                           compare_topologies, run_scenario)
from .store import FixtureParseError, parse_fixtures
from .system import build_system, bundled_scenario


def _cmd_validate(args) -> int:
    try:
        data = Path(args.file).read_bytes()
    except OSError as exc:
        print(f"cannot read {args.file}: {exc}", file=sys.stderr)
        return 2
    report = ev.validate(data)
    if report.valid:
        print("valid")
        return 0
    for v in report.violations:
        print(f"{v.path}\t{v.rule}\t{v.detail}")
    return 1


def _cmd_simulate(args) -> int:
    if args.scenario:
        try:
            text = Path(args.scenario).read_text("utf-8")
        except OSError as exc:
            print(f"cannot read {args.scenario}: {exc}", file=sys.stderr)
            return 2
    else:
        text = bundled_scenario()
    system = build_system()
    try:
        trace = run_scenario(text, system.bus)
    except ScenarioParseError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 1
    for step in trace.steps:
        request = ev.parse(step.request)
        label = f"{step.ref} {request.operation}"
        if step.fault is not None:
            print(f"{label} !! {step.fault.code}: {step.fault.message}")
            continue
        body = step.response.body
        state = getattr(body, "state", None)
        if state is not None:
            print(f"{label} -> {state}")
        else:
            print(f"{label} ok")
    finals = trace.final_states(system.store)
    print()
    print("final states:")
    for ref in sorted(finals):
        print(f"  {ref} {finals[ref]}")
    census: dict[str, int] = {}
    for state in finals.values():
        census[state] = census.get(state, 0) + 1
    print("census:")
    for state in sorted(census):
        print(f"  {state} {census[state]}")
    return 0


def _cmd_compare(args) -> int:
    try:
        soa, baseline = compare_topologies(args.policy_types)
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    names = sorted(set(soa.instance_counts) | set(baseline.instance_counts))
    width = max([len(n) for n in names] + [len("total instances")])
    print(f"policy types: {args.policy_types}")
    print(f"{'service':<{width}}  {'shared':>8}  {'per-type':>8}")
    for name in names:
        print(f"{name:<{width}}  {soa.instance_counts.get(name, 0):>8}"
              f"  {baseline.instance_counts.get(name, 0):>8}")
    print(f"{'total instances':<{width}}  {soa.total_shared_instances:>8}"
          f"  {baseline.total_shared_instances:>8}")
    return 0


def _cmd_seed(args) -> int:
    try:
        text = Path(args.fixtures).read_text("utf-8")
    except OSError as exc:
        print(f"cannot read {args.fixtures}: {exc}", file=sys.stderr)
        return 2
    try:
        summary = parse_fixtures(text).summary()
    except FixtureParseError as exc:
        print(f"fixture error: {exc}", file=sys.stderr)
        return 1
    print(f"companies {summary.companies}")
    print(f"policies  {summary.policies}")
    print(f"tpas      {summary.tpas}")
    print(f"hospitals {summary.hospitals}")
    print(f"users     {summary.users}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .gateway import create_app

    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    port = args.port if args.port is not None else config.port
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medclaim",
        description="service-oriented medical insurance claim platform")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate an envelope document file")
    p.add_argument("file")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("simulate", help="run a claim scenario end to end")
    p.add_argument("--scenario", help="scenario file (default: bundled demo)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compare",
                       help="compare shared vs per-type service topologies")
    p.add_argument("--policy-types", type=int, required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("seed", help="parse a fixture file and report counts")
    p.add_argument("--fixtures", required=True)
    p.set_defaults(func=_cmd_seed)

    p = sub.add_parser("serve", help="run the HTTP gateway")
    p.add_argument("--config", help="INI config file")
    p.add_argument("--port", type=int, help="override the configured port")
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
