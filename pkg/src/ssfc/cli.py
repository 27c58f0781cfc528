"""Command line entry points: run, table1, trace, serve."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import threading
from pathlib import Path

from .api import ApiServer, create_app
from .runner import ScenarioRun, drive_realtime, run_scenario, table1_report, trace_report
from .scenario import ScenarioError, load_scenario

log = logging.getLogger("ssfc")


def _setup_logging() -> None:
    level = os.environ.get("SSFC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _load(ref: str):
    try:
        return load_scenario(ref)
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        sys.exit(2)


def _parse_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)


def cmd_run(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    if args.serve:
        host, port = _parse_addr(args.serve)
        run = ScenarioRun(scenario, args.seed)
        server = ApiServer(create_app(run.controller, static_dir=args.static), host, port)
        server.start()
        log.info("controller API at http://%s:%s", host, port)
        total_ticks = int(round(scenario.duration / scenario.tick_seconds))
        import time

        for _ in range(total_ticks):
            run.tick()
            time.sleep(scenario.tick_seconds)
        run.shutdown()
        server.stop()
        artifacts = run.artifacts()
    else:
        artifacts = run_scenario(scenario, seed=args.seed, realtime=args.realtime)
    sys.stdout.write(artifacts.event_log())
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "timeline.csv").write_text(artifacts.timeline_csv())
        (outdir / "summary.json").write_text(artifacts.summary_json())
        (outdir / "trace.log").write_text(artifacts.trace_log + "\n")
        print(f"artifacts written to {outdir}", file=sys.stderr)
    else:
        sys.stdout.write(artifacts.summary_json())
    return 0


def cmd_table1(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    sys.stdout.write(table1_report(scenario))
    return 0


def cmd_trace(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    report, ok = trace_report(scenario)
    sys.stdout.write(report)
    return 0 if ok else 1


def cmd_serve(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    host, port = _parse_addr(args.addr)
    run = ScenarioRun(scenario, args.seed)
    static = args.static
    if static is None and Path("frontend/dist").is_dir():
        static = "frontend/dist"
    server = ApiServer(create_app(run.controller, static_dir=static), host, port)
    stop = threading.Event()
    driver = threading.Thread(target=drive_realtime, args=(run, stop), daemon=True)
    driver.start()
    print(f"FCC API on http://{host}:{port}/api/status", file=sys.stderr)
    if static:
        print(f"dashboard on http://{host}:{port}/", file=sys.stderr)
    try:
        server.server.run()
    except KeyboardInterrupt:
        pass
    finally:
        stop.set()
        run.shutdown()
    return 0


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(prog="ssfc", description="Security service function chain reordering sandbox")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario and emit its timeline")
    p_run.add_argument("scenario")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--realtime", action="store_true", help="pace ticks against the wall clock")
    p_run.add_argument("--serve", metavar="ADDR", help="expose the controller API while running")
    p_run.add_argument("--static", default=None, help="dashboard asset directory for --serve")
    p_run.add_argument("--out", default=None, help="directory for timeline.csv / summary.json / trace.log")
    p_run.set_defaults(func=cmd_run)

    p_t1 = sub.add_parser("table1", help="rank all chain orders by total instance count")
    p_t1.add_argument("scenario")
    p_t1.set_defaults(func=cmd_table1)

    p_tr = sub.add_parser("trace", help="install and probe-trace every permutation")
    p_tr.add_argument("scenario")
    p_tr.set_defaults(func=cmd_trace)

    p_sv = sub.add_parser("serve", help="run controller + simulation live for the dashboard")
    p_sv.add_argument("scenario")
    p_sv.add_argument("--addr", default="127.0.0.1:8080")
    p_sv.add_argument("--seed", type=int, default=None)
    p_sv.add_argument("--static", default=None, help="dashboard asset directory")
    p_sv.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
