"""Boot the full cell from cold, run scripted scenarios, check transcripts.

Scenarios are data files: initial plant layout, the task, scripted
clarifier answers keyed by error category, and assertions over the trace
and the final plant snapshot. An infrastructure failure (stack refuses to
boot) is reported as its own status, distinct from assertion failures.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from ..bus import BusServer
from ..mcpserver import HttpServerHandle, serve_http
from ..orchestrator.api import PlantObserver
from ..orchestrator.catalog import discover
from ..orchestrator.llm import LlmConfig, llm_plan_factory
from ..orchestrator.planner import deterministic_plan
from ..orchestrator.session import TaskSpec, pair_invocations, run_session
from ..plant import PlantSim
from ..servers import drill as drill_server
from ..servers import robot as robot_server
from ..servers import spindle as spindle_server

log = logging.getLogger(__name__)

SERVER_NAMES = ("spindle", "drill", "robot")


class InfraError(Exception):
    """The stack failed to boot; not an assertion failure."""


@dataclass
class ScenarioScript:
    name: str
    title: str = ""
    plant: dict = field(default_factory=dict)
    task: dict = field(default_factory=dict)
    clarifier_answers: dict = field(default_factory=dict)
    assertions: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioScript":
        return cls(
            name=raw["name"],
            title=raw.get("title", ""),
            plant=raw.get("plant", {}),
            task=raw["task"],
            clarifier_answers=raw.get("clarifier_answers", {}) or {},
            assertions=raw.get("assertions", {}) or {},
        )

    @classmethod
    def load(cls, path) -> "ScenarioScript":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_dict(yaml.safe_load(handle))


def builtin_scenarios() -> dict[str, ScenarioScript]:
    """Scenario files shipped in mcpcell/scenarios, keyed by name."""
    from importlib.resources import files

    scenarios = {}
    root = files("mcpcell").joinpath("scenarios")
    for resource in sorted(root.iterdir(), key=lambda r: r.name):
        if resource.name.endswith(".yaml"):
            with resource.open("r", encoding="utf-8") as handle:
                script = ScenarioScript.from_dict(yaml.safe_load(handle))
            scenarios[script.name] = script
    return scenarios


@dataclass
class Verdict:
    scenario: str
    status: str  # "pass" | "fail" | "infra_error" | "skipped_no_llm"
    failures: list = field(default_factory=list)
    steps: int = 0
    tool_calls: int = 0
    runtime_s: float = 0.0
    transcript: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"


class CellStack:
    """Plant + bus + the three tool servers, wired on fresh localhost ports."""

    def __init__(self, plant_config: dict, disable: tuple = ()):
        workpieces = plant_config.get("workpieces")
        robot_location = plant_config.get("robot", "dock")
        try:
            self.sim = PlantSim(workpieces=workpieces, robot_location=robot_location)
            self.bus = BusServer(self.sim, record=True)
        except Exception as exc:
            raise InfraError(f"plant/bus boot failed: {exc}") from exc
        self.handles: dict[str, HttpServerHandle] = {}
        self.endpoints: dict[str, str] = {}
        builders = {
            "spindle": lambda: spindle_server.build_server(),
            "drill": lambda: drill_server.build_server(self.bus.address),
            "robot": lambda: robot_server.build_server(self.bus.address),
        }
        try:
            for name in SERVER_NAMES:
                if name in disable:
                    continue
                handle = serve_http(builders[name]().handle)
                self.handles[name] = handle
                self.endpoints[name] = f"http://{handle.address}/mcp"
        except Exception as exc:
            self.close()
            raise InfraError(f"tool server boot failed: {exc}") from exc

    def close(self) -> None:
        for handle in self.handles.values():
            handle.stop()
        self.bus.stop()


def scripted_clarifier(answers: dict):
    """Clarifier matching questions by error category, not wording."""

    def clarify(question, options, category):
        return answers.get(category)

    return clarify


def run_scenario(
    script: ScenarioScript,
    planner: str = "deterministic",
    out_dir: Optional[Path] = None,
    disable: tuple = (),
    llm_config: Optional[LlmConfig] = None,
) -> Verdict:
    if planner == "llm":
        llm_config = llm_config or LlmConfig.from_env()
        if llm_config is None:
            return Verdict(script.name, "skipped_no_llm")

    started = time.monotonic()
    stack = CellStack(script.plant, disable=disable)
    try:
        catalog = discover(stack.endpoints)
        try:
            planner_fn = llm_plan_factory(llm_config) if planner == "llm" else deterministic_plan
            trace = run_session(
                TaskSpec.from_dict(script.task),
                planner_fn,
                catalog,
                clarifier=scripted_clarifier(script.clarifier_answers),
                plant_observer=PlantObserver(stack.bus.address),
                session_id=script.name,
            )
        finally:
            catalog.close()
        snapshot = stack.sim.snapshot()
    finally:
        stack.close()
    runtime = time.monotonic() - started

    events = trace.snapshot()
    transcript_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        transcript_path = out_dir / f"{script.name}.ndjson"
        with open(transcript_path, "w", encoding="utf-8") as handle:
            for event in events:
                handle.write(json.dumps(event, separators=(",", ":")) + "\n")

    failures = evaluate_assertions(script.assertions, events, snapshot, runtime)
    return Verdict(
        scenario=script.name,
        status="pass" if not failures else "fail",
        failures=failures,
        steps=len(events),
        tool_calls=sum(1 for e in events if e["type"] == "tool_call"),
        runtime_s=round(runtime, 3),
        transcript=str(transcript_path) if transcript_path else None,
    )


# --- assertion evaluation ----------------------------------------------------


def _matches(invocation: dict, matcher: dict) -> bool:
    if matcher.get("tool") and invocation["tool"] != matcher["tool"]:
        return False
    if "ok" in matcher:
        result = invocation["result"]
        succeeded = result is not None and not result.get("is_error")
        if succeeded != matcher["ok"]:
            return False
    for key, value in (matcher.get("args") or {}).items():
        if invocation["args"].get(key) != value:
            return False
    return True


def evaluate_assertions(assertions: dict, events: list, snapshot: dict, runtime: float) -> list:
    failures: list[str] = []
    invocations = pair_invocations(events)
    terminal = next((e for e in reversed(events) if e["type"] in ("done", "failed")), None)

    def check(condition: bool, message: str) -> None:
        if not condition:
            failures.append(message)

    if "terminal" in assertions:
        actual = terminal["type"] if terminal else None
        detail = f" ({terminal.get('reason')})" if terminal and terminal["type"] == "failed" else ""
        check(
            actual == assertions["terminal"],
            f"terminal: expected {assertions['terminal']}, got {actual}{detail}",
        )

    if "max_runtime_seconds" in assertions:
        check(
            runtime < assertions["max_runtime_seconds"],
            f"runtime {runtime:.2f}s exceeded budget {assertions['max_runtime_seconds']}s",
        )

    if "tool_call_order" in assertions:
        order = [e["tool"] for e in events if e["type"] == "tool_call"]
        check(
            order == list(assertions["tool_call_order"]),
            f"tool_call_order: expected {assertions['tool_call_order']}, got {order}",
        )

    if "tool_calls_total" in assertions:
        total = sum(1 for e in events if e["type"] == "tool_call")
        check(
            total == assertions["tool_calls_total"],
            f"tool_calls_total: expected {assertions['tool_calls_total']}, got {total}",
        )

    if "clarification_count" in assertions:
        count = sum(1 for e in events if e["type"] == "clarification_request")
        check(
            count == assertions["clarification_count"],
            f"clarification_count: expected {assertions['clarification_count']}, got {count}",
        )

    if "clarification_options" in assertions:
        requests = [e for e in events if e["type"] == "clarification_request"]
        for request in requests:
            check(
                request.get("options") == list(assertions["clarification_options"]),
                f"clarification options {request.get('options')} != "
                f"{assertions['clarification_options']}",
            )
        check(bool(requests), "clarification_options asserted but no clarification occurred")

    if "error_categories" in assertions:
        counts: dict[str, int] = {}
        for event in events:
            if event["type"] == "tool_result" and event.get("is_error"):
                category = (event.get("structured") or {}).get("category", "unknown")
                counts[category] = counts.get(category, 0) + 1
        for category, expected in assertions["error_categories"].items():
            check(
                counts.get(category, 0) == expected,
                f"error_categories[{category}]: expected {expected}, got {counts.get(category, 0)}",
            )

    if "calls_include" in assertions:
        for matcher in assertions["calls_include"]:
            check(
                any(_matches(inv, matcher) for inv in invocations),
                f"no tool call matching {matcher}",
            )

    if "precedence" in assertions:
        for rule in assertions["precedence"]:
            after_idx = next(
                (i for i, inv in enumerate(invocations) if _matches(inv, rule["after"])), None
            )
            if after_idx is None:
                failures.append(f"precedence: no invocation matching after={rule['after']}")
                continue
            check(
                any(_matches(inv, rule["before"]) for inv in invocations[:after_idx]),
                f"precedence: nothing matching {rule['before']} before invocation {after_idx}",
            )

    if "last_call" in assertions:
        check(
            bool(invocations) and _matches(invocations[-1], assertions["last_call"]),
            f"last_call: final invocation does not match {assertions['last_call']}",
        )

    if assertions.get("transition_compliance"):
        failures.extend(_check_transition_compliance(events, invocations))

    if "final_plant" in assertions:
        failures.extend(_check_final_plant(assertions["final_plant"], snapshot))

    return failures


def _check_transition_compliance(events: list, invocations: list) -> list:
    """Successful drills must use the rpm produced by a prior successful
    calculation and happen while the workpiece is known to be at the drill."""
    failures = []
    for index, invocation in enumerate(invocations):
        if invocation["tool"] != "drill":
            continue
        result = invocation["result"]
        if result is None or result.get("is_error"):
            continue
        rpm_before = None
        for earlier in invocations[:index]:
            if (
                earlier["tool"] == "calculate_spindle_speed"
                and earlier["result"] is not None
                and not earlier["result"].get("is_error")
            ):
                rpm_before = (earlier["result"].get("structured") or {}).get("rpm")
        if rpm_before != invocation["args"].get("rpm"):
            failures.append(
                f"drill used rpm {invocation['args'].get('rpm')} but last calculation "
                f"returned {rpm_before}"
            )
        workpiece = invocation["args"].get("workpiece")
        if _known_location_before(events, invocations[:index], workpiece) != "drill_station":
            failures.append(f"drill succeeded but {workpiece} was not known to be at drill_station")
    return failures


def _known_location_before(events: list, earlier_invocations: list, workpiece: str):
    location = None
    for event in events:
        if event["type"] == "plan_note" and event.get("note") == "plant_observation":
            location = (event.get("data", {}).get("workpieces") or {}).get(workpiece, location)
    for invocation in earlier_invocations:
        if invocation["tool"] == "transport_workpiece" and invocation["args"].get(
            "workpiece"
        ) == workpiece:
            result = invocation["result"]
            if result is not None and not result.get("is_error"):
                location = (result.get("structured") or {}).get("workpiece_location", location)
    return location


def _check_final_plant(expected: dict, snapshot: dict) -> list:
    failures = []
    for wp_id, spec in (expected.get("workpieces") or {}).items():
        actual = snapshot["workpieces"].get(wp_id)
        if actual is None:
            failures.append(f"final_plant: workpiece {wp_id} missing")
            continue
        if "location" in spec and actual["location"] != spec["location"]:
            failures.append(
                f"final_plant: {wp_id} at {actual['location']}, expected {spec['location']}"
            )
        if "holes" in spec:
            holes = spec["holes"]
            if isinstance(holes, int):
                if len(actual["holes"]) != holes:
                    failures.append(
                        f"final_plant: {wp_id} has {len(actual['holes'])} hole(s), expected {holes}"
                    )
            elif actual["holes"] != holes:
                failures.append(
                    f"final_plant: {wp_id} holes {actual['holes']} != expected {holes}"
                )
    if "robot" in expected:
        for key, value in expected["robot"].items():
            if snapshot["robot"].get(key) != value:
                failures.append(f"final_plant: robot.{key}={snapshot['robot'].get(key)} != {value}")
    if "drill_state" in expected and snapshot["drill"]["state"] != expected["drill_state"]:
        failures.append(
            f"final_plant: drill state {snapshot['drill']['state']} != {expected['drill_state']}"
        )
    return failures


# --- multi-scenario runs ------------------------------------------------------


def run_all(
    scenarios: list,
    planner: str = "deterministic",
    out_dir: Optional[Path] = None,
    parallel: bool = False,
) -> list[Verdict]:
    if parallel:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=min(4, max(1, len(scenarios)))) as pool:
            return list(pool.map(lambda s: _run_one_safely(s, planner, out_dir), scenarios))
    return [_run_one_safely(script, planner, out_dir) for script in scenarios]


def _run_one_safely(script: ScenarioScript, planner: str, out_dir) -> Verdict:
    try:
        return run_scenario(script, planner=planner, out_dir=out_dir)
    except InfraError as exc:
        return Verdict(script.name, "infra_error", failures=[str(exc)])


def summarize(verdicts: list[Verdict]) -> str:
    header = f"{'scenario':<14} {'status':<14} {'events':>6} {'calls':>5}  failures"
    lines = [header, "-" * len(header)]
    for verdict in verdicts:
        first_failure = verdict.failures[0] if verdict.failures else ""
        lines.append(
            f"{verdict.scenario:<14} {verdict.status:<14} {verdict.steps:>6} "
            f"{verdict.tool_calls:>5}  {first_failure}"
        )
    return "\n".join(lines)
