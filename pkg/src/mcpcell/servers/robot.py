"""Gateway tool server: mobile robot transport over the device bus.

Sends a Robot.Transport goal and relays its terminal result. Position
feedback is folded into the human-readable text block (and the gateway
log), never into the structured result the planner consumes.
"""

from __future__ import annotations

import logging
from typing import Optional

from .. import __version__
from ..capabilities import builtin_capabilities, check_property_constraints, render_tool
from ..jsonrpc import ToolCallResult
from ..mcpserver import ToolServer, run_server_cli
from .common import add_bus_argument, violation_result
from .gateway import GatewayBinding

log = logging.getLogger(__name__)

_CAP = None


def _capability():
    global _CAP
    if _CAP is None:
        _CAP = builtin_capabilities()["robot"][0]
    return _CAP


class RobotGateway:
    def __init__(self, binding: GatewayBinding):
        self.binding = binding
        self.capability = _capability()
        self.action = self.capability.skill.bus_nodes["goal"]

    def __call__(self, args: dict) -> ToolCallResult:
        failure = violation_result(check_property_constraints(self.capability, args))
        if failure is not None:
            return failure

        client = self.binding.client()
        reply = client.goal(self.action, {"workpiece": args["workpiece"], "to": args["to"]})
        if "error" in reply and reply.get("status") != "failure":
            return ToolCallResult.fail(reply["error"], f"transport goal rejected: {reply['error']}")

        if reply.get("status") in ("success", "failure"):
            result, positions = reply, []
        else:
            cid = reply["cid"]
            result, positions = self._await_result(client, cid)
            if result is None:
                return ToolCallResult.fail(
                    "device_timeout", "robot reported no result within the polling window"
                )

        if result["status"] == "failure":
            return ToolCallResult.fail(
                result["error"], f"transport failed: {result['error']}"
            )

        note = result.get("note")
        location = result["location"]
        route = f" via {' -> '.join(positions)}" if positions else ""
        text = f"workpiece {args['workpiece']} is at {location}{route}"
        if note:
            text += f" ({note})"
        structured = {"status": "done", "workpiece_location": location}
        if note:
            structured["note"] = note
        return ToolCallResult.ok(text, structured=structured)

    def _await_result(self, client, cid):
        positions: list[str] = []
        elapsed = 0
        while elapsed < self.binding.poll_timeout_ms:
            client.call("Clock.Advance", {"ms": self.binding.poll_interval_ms})
            elapsed += self.binding.poll_interval_ms
            for message in client.take_async(cid):
                if "feedback" in message:
                    position = message["feedback"].get("position")
                    if position:
                        positions.append(position)
                        log.info("transport feedback: robot at %s", position)
                elif "status" in message:
                    return message, positions
        return None, positions


def build_server(bus_addr: str) -> ToolServer:
    server = ToolServer("robot", __version__)
    server.add_tool(render_tool(_capability()), RobotGateway(GatewayBinding(bus_addr)))
    return server


def main(argv: Optional[list] = None) -> int:
    return run_server_cli(
        "mcp-robot", lambda args: build_server(args.bus), argv, extra=add_bus_argument
    )


if __name__ == "__main__":
    raise SystemExit(main())
