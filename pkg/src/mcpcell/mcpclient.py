"""MCP client over stdio (child process) or HTTP.

connect() returns a client handle; initialize() must complete before
list_tools()/call_tool(). Tool-level failures come back as
ToolCallResult(is_error=True); protocol errors raise McpError.
"""

from __future__ import annotations

import itertools
import subprocess
import threading
from typing import Any, Optional, Union

import requests

from .jsonrpc import (
    ProtocolMessage,
    ToolCallResult,
    ToolDescriptor,
    decode_frame,
    encode_frame,
)

DEFAULT_TIMEOUT = 30.0


class ConnectionError_(Exception):
    """Transport lost or endpoint unreachable."""


class McpError(Exception):
    """JSON-RPC level error response."""

    def __init__(self, code: int, message: str, data: Any = None):
        super().__init__(f"[{code}] {message}")
        self.code = code
        self.message = message
        self.data = data


class NotInitialized(Exception):
    pass


class _StdioTransport:
    def __init__(self, command: list[str]):
        try:
            self._proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as exc:
            raise ConnectionError_(f"cannot spawn {command!r}: {exc}") from exc

    def roundtrip(self, frame: bytes) -> bytes:
        proc = self._proc
        if proc.poll() is not None:
            raise ConnectionError_("server process exited")
        try:
            proc.stdin.write(frame)
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ConnectionError_(f"write failed: {exc}") from exc
        line = proc.stdout.readline()
        if not line:
            raise ConnectionError_("server closed stdout")
        return line

    def send(self, frame: bytes) -> None:
        try:
            self._proc.stdin.write(frame)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ConnectionError_(f"write failed: {exc}") from exc

    def close(self) -> None:
        proc = self._proc
        if proc.poll() is None:
            try:
                proc.stdin.close()
            except OSError:
                pass
            try:
                proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()


class _HttpTransport:
    def __init__(self, url: str, timeout: float = DEFAULT_TIMEOUT):
        self._url = url
        self._timeout = timeout
        self._session = requests.Session()

    def roundtrip(self, frame: bytes) -> bytes:
        try:
            resp = self._session.post(
                self._url,
                data=frame,
                headers={"Content-Type": "application/json"},
                timeout=self._timeout,
            )
        except requests.RequestException as exc:
            raise ConnectionError_(f"POST {self._url} failed: {exc}") from exc
        if resp.status_code not in (200, 202):
            raise ConnectionError_(f"POST {self._url} -> HTTP {resp.status_code}")
        return resp.content

    def send(self, frame: bytes) -> None:
        self.roundtrip(frame)  # notifications still POST; 202 has no body

    def close(self) -> None:
        self._session.close()


class McpClient:
    """One connection to one MCP server. call_tool invocations are
    serialized per connection; the handle may be shared across threads."""

    def __init__(self, transport: Union[_StdioTransport, _HttpTransport], framing: str):
        self._transport = transport
        self._framing = framing
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._initialized = False
        self.server_info: dict = {}

    def _call(self, method: str, params: Any = None) -> Any:
        with self._lock:
            req = ProtocolMessage.request(next(self._ids), method, params)
            raw = self._transport.roundtrip(encode_frame(req, self._framing))
        reply = decode_frame(raw)
        if reply.kind != "response" or reply.id != req.id:
            raise ConnectionError_(f"mismatched reply to {method}: {reply}")
        if reply.error is not None:
            raise McpError(reply.error.code, reply.error.message, reply.error.data)
        return reply.result

    def initialize(self) -> dict:
        result = self._call("initialize", {"clientInfo": {"name": "mcpcell"}})
        with self._lock:
            self._transport.send(
                encode_frame(
                    ProtocolMessage.notification("notifications/initialized"), self._framing
                )
            )
        self._initialized = True
        self.server_info = result.get("serverInfo", {})
        return result

    def ping(self) -> None:
        self._call("ping")

    def list_tools(self) -> list[ToolDescriptor]:
        self._require_init()
        result = self._call("tools/list")
        return [ToolDescriptor.from_wire(t) for t in result.get("tools", [])]

    def call_tool(self, name: str, arguments: Optional[dict] = None) -> ToolCallResult:
        self._require_init()
        result = self._call("tools/call", {"name": name, "arguments": arguments or {}})
        return ToolCallResult.from_wire(result)

    def close(self) -> None:
        self._transport.close()

    def _require_init(self) -> None:
        if not self._initialized:
            raise NotInitialized("initialize() must complete first")

    def __enter__(self) -> "McpClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def connect(endpoint: Union[str, list[str]], timeout: float = DEFAULT_TIMEOUT) -> McpClient:
    """Open a connection. endpoint is an http(s) URL or an argv list for a
    stdio server child process ("stdio:prog arg..." also works)."""
    if isinstance(endpoint, list):
        return McpClient(_StdioTransport(endpoint), "stdio")
    if endpoint.startswith("http://") or endpoint.startswith("https://"):
        url = endpoint if endpoint.endswith("/mcp") else endpoint.rstrip("/") + "/mcp"
        return McpClient(_HttpTransport(url, timeout), "http")
    if endpoint.startswith("stdio:"):
        return McpClient(_StdioTransport(endpoint[len("stdio:"):].split()), "stdio")
    raise ValueError(f"unrecognized endpoint {endpoint!r}")
