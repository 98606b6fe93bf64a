"""MCP tool server: lifecycle methods plus stdio and HTTP transports.

A server is a request->response mapping wrapped by one of the transports.
Stdio reads newline-delimited frames; HTTP accepts one JSON-RPC message per
POST to /mcp and always answers 200 for JSON-RPC-level outcomes.
"""

from __future__ import annotations

import json
import logging
import re
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional

from .jsonrpc import (
    INTERNAL_ERROR,
    INVALID_PARAMS,
    METHOD_NOT_FOUND,
    DecodeError,
    ProtocolMessage,
    ToolCallResult,
    ToolDescriptor,
    decode_frame,
    encode_frame,
)

log = logging.getLogger(__name__)

PROTOCOL_VERSION = "desk-1"

Handler = Callable[[ProtocolMessage], Optional[ProtocolMessage]]


class MethodNotFound(Exception):
    pass


class InvalidParams(Exception):
    pass


class ToolServer:
    """Dispatches the MCP methods (initialize, ping, tools/list, tools/call)
    for a fixed set of tools.

    Tools are registered as (descriptor, callable); the callable takes the
    argument mapping and returns a ToolCallResult. Exceptions escaping a tool
    become is_error results, never protocol errors.
    """

    def __init__(self, name: str, version: str = "0.1.0"):
        self.name = name
        self.version = version
        self._tools: dict[str, tuple[ToolDescriptor, Callable[[dict], ToolCallResult]]] = {}

    def add_tool(self, descriptor: ToolDescriptor, fn: Callable[[dict], ToolCallResult]) -> None:
        if not re.fullmatch(r"[a-z][a-z0-9_]*", descriptor.name):
            raise ValueError(f"invalid tool name {descriptor.name!r}")
        if not descriptor.description.strip():
            raise ValueError(f"tool {descriptor.name!r} needs a description")
        if descriptor.name in self._tools:
            raise ValueError(f"tool {descriptor.name!r} already registered")
        self._tools[descriptor.name] = (descriptor, fn)

    def descriptors(self) -> list[ToolDescriptor]:
        return [desc for desc, _ in self._tools.values()]

    def handle(self, msg: ProtocolMessage) -> Optional[ProtocolMessage]:
        if msg.kind == "notification":
            # notifications/initialized and friends need no reply
            return None
        try:
            result = self._dispatch(msg.method or "", msg.params)
        except MethodNotFound:
            return ProtocolMessage.error_response(
                msg.id, METHOD_NOT_FOUND, f"method not found: {msg.method}"
            )
        except InvalidParams as exc:
            return ProtocolMessage.error_response(msg.id, INVALID_PARAMS, str(exc))
        except Exception as exc:  # tool internals must not take the server down
            log.exception("internal error handling %s", msg.method)
            return ProtocolMessage.error_response(msg.id, INTERNAL_ERROR, str(exc))
        return ProtocolMessage.response(msg.id, result)

    def _dispatch(self, method: str, params) -> dict:
        if method == "initialize":
            return {
                "protocolVersion": PROTOCOL_VERSION,
                "serverInfo": {"name": self.name, "version": self.version},
                "capabilities": {"tools": {}},
            }
        if method == "ping":
            return {}
        if method == "tools/list":
            return {"tools": [d.to_wire() for d in self.descriptors()]}
        if method == "tools/call":
            if not isinstance(params, dict) or not isinstance(params.get("name"), str):
                raise InvalidParams("tools/call needs params {name, arguments}")
            name = params["name"]
            args = params.get("arguments") or {}
            if not isinstance(args, dict):
                raise InvalidParams("arguments must be an object")
            entry = self._tools.get(name)
            if entry is None:
                result = ToolCallResult.fail(
                    "unknown_tool", f"no tool named {name!r} on server {self.name!r}"
                )
            else:
                try:
                    result = entry[1](args)
                except Exception as exc:
                    log.exception("tool %s raised", name)
                    result = ToolCallResult.fail("tool_error", f"{name} failed: {exc}")
            return result.to_wire()
        raise MethodNotFound(method)


def _response_for_frame(handler: Handler, raw: bytes) -> Optional[ProtocolMessage]:
    """Decode one frame and run it through the handler, mapping decode
    failures to -32700/-32600 responses."""
    try:
        msg = decode_frame(raw)
    except DecodeError as exc:
        return ProtocolMessage.error_response(exc.msg_id, exc.code, exc.detail)
    return handler(msg)


def serve_stdio(handler: Handler, stdin=None, stdout=None) -> None:
    """Answer newline-delimited frames until EOF. Blocks the calling thread."""
    rfile = stdin if stdin is not None else sys.stdin.buffer
    wfile = stdout if stdout is not None else sys.stdout.buffer
    for line in rfile:
        if not line.strip():
            continue
        reply = _response_for_frame(handler, line)
        if reply is not None:
            wfile.write(encode_frame(reply, "stdio"))
            wfile.flush()


class _McpHttpRequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "mcpcell"
    disable_nagle_algorithm = True
    wbufsize = -1  # coalesce headers+body into one segment

    def log_message(self, fmt, *args):  # stay quiet; stderr belongs to logging
        log.debug("http %s", fmt % args)

    def do_POST(self):
        if self.path != "/mcp":
            self.send_error(404)
            return
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        reply = _response_for_frame(self.server.mcp_handler, raw)  # type: ignore[attr-defined]
        if reply is None:
            body = b""
            self.send_response(202)
        else:
            body = encode_frame(reply, "http")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if body:
            self.wfile.write(body)


class HttpServerHandle:
    """A running HTTP MCP server; stop() shuts it down cleanly."""

    def __init__(self, server: ThreadingHTTPServer, thread: threading.Thread):
        self._server = server
        self._thread = thread

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"{host}:{port}"

    @property
    def url(self) -> str:
        return f"http://{self.address}/mcp"

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)


def serve_http(handler: Handler, listen: str = "127.0.0.1:0") -> HttpServerHandle:
    """Serve the handler at POST /mcp; port 0 picks a free port."""
    host, _, port = listen.rpartition(":")
    try:
        server = ThreadingHTTPServer((host or "127.0.0.1", int(port)), _McpHttpRequestHandler)
    except OSError as exc:
        raise RuntimeError(f"cannot bind {listen}: {exc}") from exc
    server.daemon_threads = True
    server.mcp_handler = handler  # type: ignore[attr-defined]
    thread = threading.Thread(
        target=lambda: server.serve_forever(poll_interval=0.05),
        daemon=True,
        name=f"mcp-http-{port}",
    )
    thread.start()
    return HttpServerHandle(server, thread)


def run_server_cli(
    prog: str,
    build: Callable,
    argv: Optional[list[str]] = None,
    extra: Optional[Callable] = None,
) -> int:
    """Shared main() for the tool server binaries: stdio by default,
    --http to listen, --describe to print the descriptors and exit.

    build(args) -> ToolServer runs after argument parsing so gateways can
    pick up their --bus address first.
    """
    import argparse

    parser = argparse.ArgumentParser(prog=prog)
    parser.add_argument("--http", metavar="ADDR", help="listen on host:port instead of stdio")
    parser.add_argument(
        "--describe", action="store_true", help="print tool descriptors as JSON and exit"
    )
    if extra:
        extra(parser)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, stream=sys.stderr)
    server = build(args)

    if args.describe:
        json.dump([d.to_wire() for d in server.descriptors()], sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 0

    if args.http:
        handle = serve_http(server.handle, args.http)
        log.info("%s serving on http://%s/mcp", server.name, handle.address)
        try:
            threading.Event().wait()
        except KeyboardInterrupt:
            handle.stop()
        return 0
    serve_stdio(server.handle)
    return 0
