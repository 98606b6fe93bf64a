"""Gateway tool server: drilling over the device bus.

One tools/call maps to Drill.Start, a poll of Drill.State until Complete,
and a Drill.Reset to hand the machine back idle.
"""

from __future__ import annotations

from typing import Optional

from .. import __version__
from ..capabilities import builtin_capabilities, check_property_constraints, render_tool
from ..jsonrpc import ToolCallResult
from ..mcpserver import ToolServer, run_server_cli
from .common import add_bus_argument, violation_result
from .gateway import GatewayBinding, poll_state_until

_CAP = None


def _capability():
    global _CAP
    if _CAP is None:
        _CAP = builtin_capabilities()["drill"][0]
    return _CAP


class DrillGateway:
    def __init__(self, binding: GatewayBinding):
        self.binding = binding
        self.capability = _capability()
        self.nodes = self.capability.skill.bus_nodes

    def __call__(self, args: dict) -> ToolCallResult:
        failure = violation_result(check_property_constraints(self.capability, args))
        if failure is not None:
            return failure

        client = self.binding.client()
        reply = client.call(
            self.nodes["start"],
            {
                "workpiece": args["workpiece"],
                "rpm": args["rpm"],
                "diameter_mm": args["diameter_mm"],
            },
        )
        if "error" in reply:
            # bus rejections pass through unreclassified
            return ToolCallResult.fail(reply["error"], f"drill rejected start: {reply['error']}")

        state = poll_state_until(self.binding, client, self.nodes["state"], ("Complete", "Error"))
        if state is None:
            return ToolCallResult.fail(
                "device_timeout", "drill did not reach Complete within the polling window"
            )
        if state == "Error":
            return ToolCallResult.fail("device_error", "drill entered Error during the job")

        client.call(self.nodes["reset"], {})
        hole = {"diameter_mm": float(args["diameter_mm"]), "rpm_used": args["rpm"]}
        return ToolCallResult.ok(
            f"drilled {hole['diameter_mm']} mm hole into {args['workpiece']} "
            f"at {args['rpm']} rpm",
            structured={"status": "done", "hole": hole},
        )


def build_server(bus_addr: str) -> ToolServer:
    server = ToolServer("drill", __version__)
    server.add_tool(render_tool(_capability()), DrillGateway(GatewayBinding(bus_addr)))
    return server


def main(argv: Optional[list] = None) -> int:
    return run_server_cli(
        "mcp-drill", lambda args: build_server(args.bus), argv, extra=add_bus_argument
    )


if __name__ == "__main__":
    raise SystemExit(main())
