"""harness CLI: run the evaluation scenarios against a cold-started cell.

    harness run --scenario <name|all> --planner <deterministic|llm> --out <dir>
    harness serve [--listen ADDR] [--planner ...]   # whole cell for the console
    harness list
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import threading
from pathlib import Path
from typing import Optional

from .runner import CellStack, ScenarioScript, Verdict, builtin_scenarios, run_all, summarize


def main(argv: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(prog="harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run_cmd = sub.add_parser("run", help="run one or all scenarios")
    run_cmd.add_argument("--scenario", default="all", help="scenario name, 'all', or a YAML path")
    run_cmd.add_argument("--planner", choices=["deterministic", "llm"], default="deterministic")
    run_cmd.add_argument("--out", default="harness-out", help="transcript/summary directory")
    run_cmd.add_argument("--parallel", action="store_true", help="isolated stacks in parallel")
    run_cmd.add_argument("-v", "--verbose", action="store_true")

    serve_cmd = sub.add_parser(
        "serve", help="boot plant + tool servers + orchestrator and keep them up"
    )
    serve_cmd.add_argument("--listen", default="127.0.0.1:8800", help="session API host:port")
    serve_cmd.add_argument("--planner", choices=["deterministic", "llm"], default="deterministic")
    serve_cmd.add_argument(
        "--scenario", default="scenario-1", help="scenario whose plant layout to start from"
    )

    sub.add_parser("list", help="list builtin scenarios")

    args = parser.parse_args(argv)

    if args.command == "list":
        for name, script in builtin_scenarios().items():
            print(f"{name}: {script.title}")
        return 0

    if args.command == "serve":
        return _serve(args)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr
    )
    available = builtin_scenarios()
    if args.scenario == "all":
        scripts = list(available.values())
    elif args.scenario in available:
        scripts = [available[args.scenario]]
    elif Path(args.scenario).exists():
        scripts = [ScenarioScript.load(args.scenario)]
    else:
        parser.error(f"unknown scenario {args.scenario!r}; try 'harness list'")
        return 2

    out_dir = Path(args.out)
    verdicts = run_all(scripts, planner=args.planner, out_dir=out_dir, parallel=args.parallel)

    print(summarize(verdicts))
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "summary.json", "w", encoding="utf-8") as handle:
        json.dump([_verdict_dict(v) for v in verdicts], handle, indent=2)
        handle.write("\n")

    if any(v.status == "infra_error" for v in verdicts):
        return 2
    return 0 if all(v.status in ("pass", "skipped_no_llm") for v in verdicts) else 1


def _verdict_dict(verdict: Verdict) -> dict:
    return {
        "scenario": verdict.scenario,
        "status": verdict.status,
        "failures": verdict.failures,
        "events": verdict.steps,
        "tool_calls": verdict.tool_calls,
        "runtime_s": verdict.runtime_s,
        "transcript": verdict.transcript,
    }


def _serve(args) -> int:
    from ..orchestrator.api import SessionManager, serve_sessions
    from ..orchestrator.llm import LlmConfig

    logging.basicConfig(level=logging.INFO, stream=sys.stderr)
    script = builtin_scenarios()[args.scenario]
    stack = CellStack(script.plant)
    manager = SessionManager(
        stack.endpoints,
        planner=args.planner,
        bus_addr=stack.bus.address,
        llm_config=LlmConfig.from_env(),
    )
    manager.start()
    handle = serve_sessions(manager, args.listen)
    print(f"session API listening on http://{handle.address}", flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        handle.stop()
        manager.stop()
        stack.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
