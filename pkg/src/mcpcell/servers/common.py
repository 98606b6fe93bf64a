"""Shared plumbing for the tool servers."""

from __future__ import annotations

import os
from typing import Optional

from ..bus import BUS_ADDR_ENV, DEFAULT_BUS_ADDR
from ..capabilities import Violation
from ..jsonrpc import ToolCallResult


def violation_result(violations: list[Violation]) -> Optional[ToolCallResult]:
    """Turn the first constraint violation into a tool error, carrying the
    supported set when the violated predicate had one."""
    if not violations:
        return None
    violation = violations[0]
    structured: dict = {"category": violation.category}
    if violation.supported is not None:
        structured["supported"] = violation.supported
    return ToolCallResult.fail(violation.category, violation.message, structured)


def default_bus_addr() -> str:
    return os.environ.get(BUS_ADDR_ENV, DEFAULT_BUS_ADDR)


def add_bus_argument(parser) -> None:
    parser.add_argument(
        "--bus",
        default=default_bus_addr(),
        help=f"device bus host:port (env {BUS_ADDR_ENV})",
    )
