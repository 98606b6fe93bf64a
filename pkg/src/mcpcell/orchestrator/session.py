"""Session engine: one planner loop per task, producing an ordered trace.

Event timestamps are logical (a per-session counter), so a deterministic
planner produces byte-identical traces run after run. A clarification
request blocks the session until the clarifier returns an answer; other
sessions are unaffected.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .catalog import Catalog

log = logging.getLogger(__name__)

DEFAULT_STEP_BUDGET = 20

TERMINAL_EVENTS = ("done", "failed")


class TaskSpecError(ValueError):
    pass


@dataclass
class TaskSpec:
    """Either a structured drilling task or free text for the LLM path."""

    kind: str  # "structured" | "free_text"
    workpiece: Optional[str] = None
    material: Optional[str] = None
    diameter_mm: Optional[float] = None
    target_station: Optional[str] = None
    free_text: Optional[str] = None

    @classmethod
    def structured(cls, workpiece, material, diameter_mm, target_station) -> "TaskSpec":
        return cls(
            kind="structured",
            workpiece=workpiece,
            material=material,
            diameter_mm=diameter_mm,
            target_station=target_station,
        )

    @classmethod
    def from_dict(cls, raw: dict) -> "TaskSpec":
        structured_keys = {"workpiece", "material", "diameter_mm", "target_station"}
        has_structured = bool(structured_keys & set(raw))
        has_text = bool(raw.get("free_text"))
        if has_structured == has_text:
            raise TaskSpecError("task needs either the structured fields or free_text")
        if has_text:
            return cls(kind="free_text", free_text=raw["free_text"])
        missing = structured_keys - set(raw)
        if missing:
            raise TaskSpecError(f"structured task missing {sorted(missing)}")
        return cls.structured(
            raw["workpiece"], raw["material"], raw["diameter_mm"], raw["target_station"]
        )

    def to_dict(self) -> dict:
        if self.kind == "free_text":
            return {"free_text": self.free_text}
        return {
            "workpiece": self.workpiece,
            "material": self.material,
            "diameter_mm": self.diameter_mm,
            "target_station": self.target_station,
        }


@dataclass
class PlannerDecision:
    """One move by the planner; exactly one of the kinds below.

    kind: call_tool {server?, tool, args} | retry {tool, args, reason}
        | clarify {question, options?, category?} | done {summary}
        | fail {reason}
    note, when set, is recorded as a plan_note event before acting.
    """

    kind: str
    server: Optional[str] = None
    tool: Optional[str] = None
    args: Optional[dict] = None
    question: Optional[str] = None
    options: Optional[list] = None
    category: Optional[str] = None
    reason: Optional[str] = None
    summary: Optional[str] = None
    note: Optional[str] = None

    @classmethod
    def call_tool(cls, tool, args, server=None, note=None):
        return cls(kind="call_tool", tool=tool, args=args, server=server, note=note)

    @classmethod
    def retry(cls, tool, args, reason, server=None):
        return cls(kind="retry", tool=tool, args=args, reason=reason, server=server)

    @classmethod
    def clarify(cls, question, options=None, category=None, note=None):
        return cls(kind="clarify", question=question, options=options, category=category, note=note)

    @classmethod
    def done(cls, summary):
        return cls(kind="done", summary=summary)

    @classmethod
    def fail(cls, reason):
        return cls(kind="fail", reason=reason)


class SessionTrace:
    """Append-only ordered event log, safe for concurrent subscribers."""

    def __init__(self, session_id: str):
        self.session_id = session_id
        self.events: list[dict] = []
        self.cond = threading.Condition()

    def append(self, event_type: str, **fields) -> dict:
        with self.cond:
            event = {"ts": len(self.events), "type": event_type, **fields}
            self.events.append(event)
            self.cond.notify_all()
        return event

    def snapshot(self) -> list[dict]:
        with self.cond:
            return list(self.events)

    @property
    def terminal(self) -> Optional[dict]:
        with self.cond:
            for event in reversed(self.events):
                if event["type"] in TERMINAL_EVENTS:
                    return event
        return None

    def wait_for(self, index: int, timeout: float = 0.25) -> list[dict]:
        """Block until events beyond `index` exist (or timeout); return them."""
        with self.cond:
            if len(self.events) <= index:
                self.cond.wait(timeout)
            return self.events[index:]


@dataclass
class PlannerContext:
    """Everything a planner may consult: the task, the discovered catalog,
    and the trace so far. Nothing else."""

    task: TaskSpec
    catalog: Catalog
    events: list[dict] = field(default_factory=list)


Clarifier = Callable[[str, Optional[list], Optional[str]], Optional[Any]]
Planner = Callable[[PlannerContext], PlannerDecision]


def run_session(
    task: TaskSpec,
    planner: Planner,
    catalog: Catalog,
    clarifier: Optional[Clarifier] = None,
    plant_observer: Optional[Callable[[], dict]] = None,
    step_budget: int = DEFAULT_STEP_BUDGET,
    trace: Optional[SessionTrace] = None,
    session_id: str = "sess-1",
) -> SessionTrace:
    """Run one planner loop to a terminal event and return the trace."""
    trace = trace if trace is not None else SessionTrace(session_id)
    trace.append("task_received", task=task.to_dict())
    trace.append(
        "tools_discovered",
        servers={name: [t.name for t in entry.tools] for name, entry in catalog.entries.items()},
        degraded=catalog.degraded(),
    )
    if not catalog.tool_names():
        trace.append("failed", reason="no_tools")
        return trace

    if plant_observer is not None:
        try:
            snap = plant_observer()
            trace.append(
                "plan_note",
                note="plant_observation",
                data={
                    "workpieces": {
                        wp: info.get("location") for wp, info in snap.get("workpieces", {}).items()
                    },
                    "robot": snap.get("robot", {}).get("location"),
                    "drill": snap.get("drill", {}).get("state"),
                },
            )
        except Exception as exc:  # noqa: BLE001 - observation is optional
            log.warning("plant observation failed: %s", exc)

    steps = 0
    while True:
        if steps >= step_budget:
            trace.append("failed", reason="budget")
            return trace
        steps += 1

        try:
            decision = planner(PlannerContext(task, catalog, trace.snapshot()))
        except Exception as exc:  # noqa: BLE001 - planner bugs end the session
            log.exception("planner raised")
            trace.append("failed", reason=f"planner_error: {exc}")
            return trace

        if decision.note:
            trace.append("plan_note", note=decision.note)

        if decision.kind in ("call_tool", "retry"):
            if decision.kind == "retry":
                trace.append("plan_note", note=f"retry {decision.tool}: {decision.reason}")
            _execute_tool(trace, catalog, decision)
        elif decision.kind == "clarify":
            options = decision.options
            if options is None:
                options = _last_error_supported(trace.snapshot())
            trace.append(
                "clarification_request",
                question=decision.question,
                options=options,
                category=decision.category,
            )
            answer = clarifier(decision.question, options, decision.category) if clarifier else None
            if answer is None:
                trace.append("failed", reason="needs_user")
                return trace
            trace.append("clarification_answer", answer=answer)
        elif decision.kind == "done":
            trace.append("done", summary=decision.summary)
            return trace
        elif decision.kind == "fail":
            trace.append("failed", reason=decision.reason)
            return trace
        else:
            trace.append("failed", reason=f"unknown_decision:{decision.kind}")
            return trace


def _execute_tool(trace: SessionTrace, catalog: Catalog, decision: PlannerDecision) -> None:
    server = decision.server
    if server is None:
        found = catalog.find_tool(decision.tool)
        server = found[0] if found else None
    trace.append("tool_call", server=server, tool=decision.tool, args=decision.args or {})
    if server is None:
        trace.append(
            "tool_result",
            server=None,
            tool=decision.tool,
            is_error=True,
            content=[f"unknown_tool: {decision.tool} is not in the catalog"],
            structured={"category": "unknown_tool"},
        )
        return
    try:
        result = catalog.call_tool(server, decision.tool, decision.args or {})
        trace.append(
            "tool_result",
            server=server,
            tool=decision.tool,
            is_error=result.is_error,
            content=list(result.content),
            structured=result.structured,
        )
    except Exception as exc:  # noqa: BLE001 - transport loss mid-session
        log.warning("tool call %s on %s failed: %s", decision.tool, server, exc)
        trace.append(
            "tool_result",
            server=server,
            tool=decision.tool,
            is_error=True,
            content=[f"connection_error: {exc}"],
            structured={"category": "connection_error"},
        )


def _last_error_supported(events: list[dict]) -> Optional[list]:
    """The supported list from the most recent error result, carried
    verbatim into clarification options."""
    for event in reversed(events):
        if event["type"] == "tool_result" and event.get("is_error"):
            structured = event.get("structured") or {}
            supported = structured.get("supported")
            if supported is not None:
                return list(supported)
            return None
    return None


def pair_invocations(events: list[dict]) -> list[dict]:
    """Zip tool_call events with their tool_result into invocation records:
    {server, tool, args, result} in trace order."""
    invocations = []
    pending: Optional[dict] = None
    for event in events:
        if event["type"] == "tool_call":
            pending = {
                "server": event.get("server"),
                "tool": event["tool"],
                "args": event.get("args", {}),
                "result": None,
                "call_ts": event["ts"],
            }
            invocations.append(pending)
        elif event["type"] == "tool_result" and pending is not None:
            pending["result"] = event
            pending = None
    return invocations
