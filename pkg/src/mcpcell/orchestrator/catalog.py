"""Tool discovery across the configured MCP servers.

The catalog produced here is the planner's only knowledge of capabilities;
there is no side channel to the registry or the plant. Unreachable servers
degrade the catalog instead of failing discovery.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

from ..jsonrpc import ToolCallResult, ToolDescriptor
from ..mcpclient import McpClient, connect

log = logging.getLogger(__name__)


@dataclass
class CatalogEntry:
    server: str
    tools: list[ToolDescriptor] = field(default_factory=list)
    error: Optional[str] = None  # set when the server could not be reached


class Catalog:
    """Discovered tools plus the live client connections used to call them."""

    def __init__(self):
        self.entries: dict[str, CatalogEntry] = {}
        self._clients: dict[str, McpClient] = {}

    def add(self, entry: CatalogEntry, client: Optional[McpClient] = None) -> None:
        self.entries[entry.server] = entry
        if client is not None:
            self._clients[entry.server] = client

    def tool_names(self) -> list[str]:
        return [tool.name for entry in self.entries.values() for tool in entry.tools]

    def find_tool(self, name: str) -> Optional[tuple[str, ToolDescriptor]]:
        for entry in self.entries.values():
            for tool in entry.tools:
                if tool.name == name:
                    return entry.server, tool
        return None

    def degraded(self) -> list[str]:
        return [name for name, entry in self.entries.items() if entry.error is not None]

    def call_tool(self, server: str, name: str, args: dict) -> ToolCallResult:
        client = self._clients.get(server)
        if client is None:
            return ToolCallResult.fail(
                "server_unavailable", f"no live connection to server {server!r}"
            )
        return client.call_tool(name, args)

    def close(self) -> None:
        for client in self._clients.values():
            try:
                client.close()
            except Exception:  # noqa: BLE001 - best-effort teardown
                pass
        self._clients.clear()


def discover(servers: dict[str, Union[str, list]]) -> Catalog:
    """initialize + tools/list each configured server; failures become
    degraded catalog entries so a session can proceed with what is left."""
    catalog = Catalog()
    for name, endpoint in servers.items():
        try:
            client = connect(endpoint)
            client.initialize()
            tools = client.list_tools()
            catalog.add(CatalogEntry(server=name, tools=tools), client)
            log.info("discovered %d tool(s) on %s", len(tools), name)
        except Exception as exc:  # noqa: BLE001 - any failure degrades the entry
            log.warning("server %s unreachable: %s", name, exc)
            catalog.add(CatalogEntry(server=name, error=str(exc)))
    return catalog
