"""Direct tool server: spindle speed recommendation from the lookup table.

Runs entirely locally; never touches the device bus. Material matching is
exact after lowercase+trim on purpose: recovering from near-miss names like
"stainless steel" is the caller's job, and the error payload carries the
supported list to make that possible.
"""

from __future__ import annotations

from typing import Optional

from .. import __version__
from ..capabilities import builtin_capabilities, check_property_constraints, render_tool
from ..jsonrpc import ToolCallResult
from ..mcpserver import ToolServer, run_server_cli
from . import table
from .common import violation_result


def normalize_args(args: dict) -> dict:
    normalized = dict(args)
    material = normalized.get("material")
    if isinstance(material, str):
        normalized["material"] = material.strip().lower()
    return normalized


def spindle_speed_from_table(args: dict) -> ToolCallResult:
    cap = _capability()
    normalized = normalize_args(args)
    failure = violation_result(check_property_constraints(cap, normalized))
    if failure is not None:
        return failure
    rpm = table.lookup_rpm(normalized["material"], normalized["diameter_mm"])
    return ToolCallResult.ok(
        f"recommended spindle speed: {rpm} rpm "
        f"({normalized['material']}, {normalized['diameter_mm']} mm)",
        structured={"rpm": rpm},
    )


_CAP = None


def _capability():
    global _CAP
    if _CAP is None:
        _CAP = builtin_capabilities()["spindle"][0]
    return _CAP


def build_server() -> ToolServer:
    server = ToolServer("spindle", __version__)
    server.add_tool(render_tool(_capability()), spindle_speed_from_table)
    return server


def main(argv: Optional[list] = None) -> int:
    return run_server_cli("mcp-spindle", lambda args: build_server(), argv)


if __name__ == "__main__":
    raise SystemExit(main())
