"""Rule-based planner used as the reproducible stand-in for the LLM.

It consults only the discovered catalog and the trace so far: workpiece
whereabouts come from the plant-observation note and later transport
results, never from a side channel into the simulation. Error recovery
mirrors how the tool descriptions say the cell behaves: compute the
spindle speed before drilling, transport the workpiece to the drill first,
retry a near-miss material name once, and ask the user when a supplied
value simply is not supported.
"""

from __future__ import annotations

from typing import Optional

from .session import PlannerContext, PlannerDecision, pair_invocations

CALC = "calculate_spindle_speed"
DRILL = "drill"
TRANSPORT = "transport_workpiece"

CLARIFIABLE = ("unsupported_diameter", "constraint_violation", "unknown_material")


def best_material_match(requested: str, supported: list) -> Optional[str]:
    """Pick the supported material sharing the most name tokens with the
    request; ties fall to the longer shared token, then lexicographic."""
    tokens = set(str(requested).strip().lower().split())
    scored = []
    for candidate in supported:
        shared = tokens & set(str(candidate).lower().split())
        if shared:
            scored.append((len(shared), max(len(t) for t in shared), str(candidate)))
    if not scored:
        return None
    scored.sort(key=lambda s: (-s[0], -s[1], s[2]))
    return scored[0][2]


def deterministic_plan(ctx: PlannerContext) -> PlannerDecision:
    task = ctx.task
    if task.kind != "structured":
        return PlannerDecision.fail("free_text_needs_llm_planner")

    events = ctx.events
    invocations = pair_invocations(events)
    material, diameter = _effective_parameters(ctx)
    if diameter is None:
        return PlannerDecision.fail("unusable_clarification_answer")

    rpm = _calculated_rpm(invocations, events)
    drilled = any(
        inv["tool"] == DRILL and _succeeded(inv) for inv in invocations
    )
    location = _workpiece_location(events, invocations, task.workpiece)

    failure = _unhandled_failure(invocations, events)
    if failure is not None:
        return _recover(ctx, failure, material, diameter, invocations)

    if drilled:
        if location == task.target_station:
            return PlannerDecision.done(
                f"{task.workpiece} drilled ({diameter} mm, {rpm} rpm) and "
                f"delivered to {task.target_station}"
            )
        return _call(ctx, TRANSPORT, {"workpiece": task.workpiece, "to": task.target_station})

    if rpm is None:
        # move the part into place before computing, when we know it is elsewhere
        if location is not None and location != "drill_station":
            return _call(
                ctx,
                TRANSPORT,
                {"workpiece": task.workpiece, "to": "drill_station"},
                note=f"{task.workpiece} is at {location}; it must be at drill_station to drill",
            )
        return _call(ctx, CALC, {"material": material, "diameter_mm": diameter})

    if location is not None and location != "drill_station":
        return _call(
            ctx,
            TRANSPORT,
            {"workpiece": task.workpiece, "to": "drill_station"},
            note=f"{task.workpiece} is at {location}; it must be at drill_station to drill",
        )
    return _call(
        ctx, DRILL, {"workpiece": task.workpiece, "rpm": rpm, "diameter_mm": diameter}
    )


def _call(ctx: PlannerContext, tool: str, args: dict, note: Optional[str] = None) -> PlannerDecision:
    found = ctx.catalog.find_tool(tool)
    if found is None:
        return PlannerDecision.fail("tool_missing")
    return PlannerDecision.call_tool(tool, args, server=found[0], note=note)


def _retry(ctx: PlannerContext, tool: str, args: dict, reason: str) -> PlannerDecision:
    found = ctx.catalog.find_tool(tool)
    if found is None:
        return PlannerDecision.fail("tool_missing")
    return PlannerDecision.retry(tool, args, reason, server=found[0])


def _succeeded(invocation: dict) -> bool:
    result = invocation["result"]
    return result is not None and not result.get("is_error")


def _effective_parameters(ctx: PlannerContext):
    """Task parameters after applying any clarification answers."""
    material = ctx.task.material
    diameter = ctx.task.diameter_mm
    pending_category = None
    for event in ctx.events:
        if event["type"] == "clarification_request":
            pending_category = event.get("category")
        elif event["type"] == "clarification_answer" and pending_category:
            answer = event.get("answer")
            if pending_category in ("unsupported_diameter", "constraint_violation"):
                diameter = _as_number(answer)
            elif pending_category == "unknown_material":
                material = str(answer).strip().lower()
            pending_category = None
    return material, diameter


def _as_number(value) -> Optional[float]:
    try:
        number = float(value)
    except (TypeError, ValueError):
        return None
    return int(number) if number.is_integer() else number


def _calculated_rpm(invocations: list[dict], events: list[dict]) -> Optional[int]:
    """rpm from the latest successful spindle-speed calculation, unless a
    later clarification changed the diameter it was computed for."""
    last_clarification = max(
        (e["ts"] for e in events if e["type"] == "clarification_answer"), default=-1
    )
    for invocation in reversed(invocations):
        if invocation["tool"] == CALC and _succeeded(invocation):
            if invocation["result"]["ts"] < last_clarification:
                return None  # parameters changed after this calculation
            structured = invocation["result"].get("structured") or {}
            return structured.get("rpm")
    return None


def _workpiece_location(events, invocations, workpiece) -> Optional[str]:
    """Best knowledge of where the workpiece is, from the trace alone."""
    location = None
    for event in events:
        if event["type"] == "plan_note" and event.get("note") == "plant_observation":
            location = (event.get("data", {}).get("workpieces") or {}).get(workpiece, location)
    for invocation in invocations:
        if invocation["tool"] == TRANSPORT and _succeeded(invocation):
            if invocation["args"].get("workpiece") == workpiece:
                structured = invocation["result"].get("structured") or {}
                location = structured.get("workpiece_location", location)
        elif invocation["tool"] == DRILL and invocation["result"] is not None:
            structured = invocation["result"].get("structured") or {}
            if invocation["args"].get("workpiece") == workpiece and _succeeded(invocation):
                location = "drill_station"  # it was drilled, so it was there
            elif structured.get("category") == "workpiece_not_present":
                if location == "drill_station":
                    location = None  # our knowledge was stale
    return location


def _unhandled_failure(invocations: list[dict], events: list[dict]) -> Optional[dict]:
    """The last invocation, if it failed and nothing has reacted to it yet
    (no later clarification round)."""
    if not invocations:
        return None
    last = invocations[-1]
    if last["result"] is None or not last["result"].get("is_error"):
        return None
    result_ts = last["result"]["ts"]
    for event in events:
        if event["ts"] > result_ts and event["type"] == "clarification_answer":
            return None  # the user already corrected course
    return last


def _recover(ctx, failure, material, diameter, invocations) -> PlannerDecision:
    category = ((failure["result"].get("structured") or {}).get("category")) or "unknown"
    supported = (failure["result"].get("structured") or {}).get("supported")
    tool = failure["tool"]

    if tool == CALC and category == "unknown_material":
        # single-shot: a calc that already used a corrected name means the
        # retry was spent, so escalate to the user
        already_retried = any(
            inv["tool"] == CALC and inv["args"].get("material") != material
            for inv in invocations
        )
        candidate = None if already_retried else best_material_match(material, supported or [])
        if candidate is not None:
            return _retry(
                ctx,
                CALC,
                {"material": candidate, "diameter_mm": diameter},
                reason=f"material '{material}' unknown; '{candidate}' is the closest supported name",
            )
        return PlannerDecision.clarify(
            f"Material '{material}' is not in the speed table. Which material should be used?",
            options=list(supported) if supported else None,
            category="unknown_material",
        )

    if tool == CALC and category in ("unsupported_diameter", "constraint_violation"):
        return PlannerDecision.clarify(
            f"Diameter {diameter} mm cannot be used. Please choose a supported diameter.",
            options=list(supported) if supported else None,
            category=category,
        )

    if tool == DRILL and category == "workpiece_not_present":
        return _call(
            ctx,
            TRANSPORT,
            {"workpiece": ctx.task.workpiece, "to": "drill_station"},
            note=f"{ctx.task.workpiece} is not at drill_station; transporting it there first",
        )

    return PlannerDecision.fail(f"unrecoverable_tool_error:{category}")
