"""JSON-RPC 2.0 message model and line framing.

One message per line, minified, for the stdio transport; the same bytes
(minus the trailing newline) travel as an HTTP body on the http transport.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional, Union

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
INTERNAL_ERROR = -32603

MessageId = Union[int, str]


class FramingError(Exception):
    """A message cannot be serialized into a frame."""


class DecodeError(Exception):
    """Raised by decode_frame; carries enough to build an error response.

    kind is "parse_error" (-32700, malformed serialization) or
    "invalid_request" (-32600, well-formed but invariant-violating).
    """

    def __init__(self, kind: str, detail: str, msg_id: Optional[MessageId] = None):
        super().__init__(detail)
        self.kind = kind
        self.detail = detail
        self.msg_id = msg_id

    @property
    def code(self) -> int:
        return PARSE_ERROR if self.kind == "parse_error" else INVALID_REQUEST


@dataclass
class ProtocolError:
    code: int
    message: str
    data: Any = None

    def to_wire(self) -> dict:
        wire: dict = {"code": self.code, "message": self.message}
        if self.data is not None:
            wire["data"] = self.data
        return wire

    @classmethod
    def from_wire(cls, wire: dict) -> "ProtocolError":
        return cls(code=wire["code"], message=wire["message"], data=wire.get("data"))


@dataclass
class ProtocolMessage:
    """A single JSON-RPC request, response, or notification.

    Invariants (enforced by validate / decode_frame):
      request       -> id and method
      notification  -> method, no id
      response      -> id and exactly one of result / error
    """

    kind: str  # "request" | "response" | "notification"
    id: Optional[MessageId] = None
    method: Optional[str] = None
    params: Any = None
    result: Any = None
    error: Optional[ProtocolError] = None

    @classmethod
    def request(cls, msg_id: MessageId, method: str, params: Any = None) -> "ProtocolMessage":
        return cls(kind="request", id=msg_id, method=method, params=params)

    @classmethod
    def notification(cls, method: str, params: Any = None) -> "ProtocolMessage":
        return cls(kind="notification", method=method, params=params)

    @classmethod
    def response(cls, msg_id: Optional[MessageId], result: Any) -> "ProtocolMessage":
        return cls(kind="response", id=msg_id, result=result)

    @classmethod
    def error_response(
        cls, msg_id: Optional[MessageId], code: int, message: str, data: Any = None
    ) -> "ProtocolMessage":
        return cls(kind="response", id=msg_id, error=ProtocolError(code, message, data))

    @property
    def is_error(self) -> bool:
        return self.kind == "response" and self.error is not None

    def validate(self) -> None:
        if self.kind == "request":
            if self.id is None or not self.method:
                raise FramingError("request needs an id and a method")
        elif self.kind == "notification":
            if self.id is not None or not self.method:
                raise FramingError("notification needs a method and no id")
        elif self.kind == "response":
            # error responses to parse failures legitimately carry id null
            if (self.result is None) == (self.error is None):
                raise FramingError("response needs exactly one of result/error")
        else:
            raise FramingError(f"unknown message kind {self.kind!r}")

    def to_wire(self) -> dict:
        wire: dict = {"jsonrpc": "2.0"}
        if self.kind == "request":
            wire["id"] = self.id
            wire["method"] = self.method
            if self.params is not None:
                wire["params"] = self.params
        elif self.kind == "notification":
            wire["method"] = self.method
            if self.params is not None:
                wire["params"] = self.params
        else:
            wire["id"] = self.id
            if self.error is not None:
                wire["error"] = self.error.to_wire()
            else:
                wire["result"] = self.result
        return wire


def encode_frame(msg: ProtocolMessage, transport: str = "stdio") -> bytes:
    """Serialize one message: a single newline-terminated line for stdio,
    bare body bytes for http (HTTP does its own framing)."""
    msg.validate()
    try:
        body = json.dumps(msg.to_wire(), separators=(",", ":"), allow_nan=False)
    except (TypeError, ValueError) as exc:
        raise FramingError(f"message not serializable: {exc}") from exc
    if "\n" in body or "\r" in body:  # json.dumps escapes these inside strings
        raise FramingError("serialized message contains a newline")
    data = body.encode("utf-8")
    if transport == "stdio":
        return data + b"\n"
    if transport == "http":
        return data
    raise FramingError(f"unknown transport {transport!r}")


def decode_frame(data: Union[bytes, str]) -> ProtocolMessage:
    """Parse one frame into a ProtocolMessage.

    Raises DecodeError(kind="parse_error") for malformed serialization and
    DecodeError(kind="invalid_request") for well-formed objects that violate
    the message invariants.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError("parse_error", f"invalid utf-8: {exc}")
    else:
        text = data
    try:
        wire = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DecodeError("parse_error", f"invalid json: {exc}")

    if isinstance(wire, list):
        # batch requests are not supported
        raise DecodeError("invalid_request", "batch requests not supported")
    if not isinstance(wire, dict):
        raise DecodeError("invalid_request", "message must be an object")

    msg_id = wire.get("id")
    if msg_id is not None and not isinstance(msg_id, (int, str)):
        raise DecodeError("invalid_request", "id must be an integer or string")

    if wire.get("jsonrpc") != "2.0":
        raise DecodeError("invalid_request", 'missing "jsonrpc":"2.0"', msg_id)

    has_method = "method" in wire
    has_result = "result" in wire
    has_error = "error" in wire

    if has_method:
        method = wire["method"]
        if not isinstance(method, str) or not method:
            raise DecodeError("invalid_request", "method must be a non-empty string", msg_id)
        if has_result or has_error:
            raise DecodeError("invalid_request", "method with result/error", msg_id)
        if "id" in wire and msg_id is None:
            raise DecodeError("invalid_request", "request id must not be null", msg_id)
        kind = "request" if "id" in wire else "notification"
        return ProtocolMessage(kind=kind, id=msg_id, method=method, params=wire.get("params"))

    if has_result and has_error:
        raise DecodeError("invalid_request", "response with both result and error", msg_id)
    if has_result or has_error:
        if "id" not in wire:
            raise DecodeError("invalid_request", "response without id", msg_id)
        error = None
        if has_error:
            err_wire = wire["error"]
            if (
                not isinstance(err_wire, dict)
                or not isinstance(err_wire.get("code"), int)
                or not isinstance(err_wire.get("message"), str)
            ):
                raise DecodeError("invalid_request", "malformed error object", msg_id)
            error = ProtocolError.from_wire(err_wire)
        return ProtocolMessage(kind="response", id=msg_id, result=wire.get("result"), error=error)

    raise DecodeError("invalid_request", "neither request, notification nor response", msg_id)


@dataclass
class ToolDescriptor:
    """MCP-side advertisement of one capability."""

    name: str
    description: str
    input_schema: dict = field(default_factory=dict)

    def to_wire(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "inputSchema": self.input_schema,
        }

    @classmethod
    def from_wire(cls, wire: dict) -> "ToolDescriptor":
        return cls(
            name=wire["name"],
            description=wire["description"],
            input_schema=wire.get("inputSchema", {}),
        )


@dataclass
class ToolCallResult:
    """Outcome of one tools/call; tool-level failures land here, not in
    protocol errors."""

    is_error: bool = False
    content: list = field(default_factory=list)  # text blocks
    structured: Any = None

    @classmethod
    def ok(cls, text: str, structured: Any = None) -> "ToolCallResult":
        return cls(is_error=False, content=[text], structured=structured)

    @classmethod
    def fail(cls, category: str, text: str, structured: Any = None) -> "ToolCallResult":
        payload = dict(structured) if isinstance(structured, dict) else {}
        payload.setdefault("category", category)
        # the text block must name the error category
        if category not in text:
            text = f"{category}: {text}"
        return cls(is_error=True, content=[text], structured=payload)

    @property
    def category(self) -> Optional[str]:
        if isinstance(self.structured, dict):
            return self.structured.get("category")
        return None

    def to_wire(self) -> dict:
        wire: dict = {
            "content": [{"type": "text", "text": t} for t in self.content],
            "isError": self.is_error,
        }
        if self.structured is not None:
            wire["structuredContent"] = self.structured
        return wire

    @classmethod
    def from_wire(cls, wire: dict) -> "ToolCallResult":
        content = [
            block.get("text", "")
            for block in wire.get("content", [])
            if block.get("type") == "text"
        ]
        return cls(
            is_error=bool(wire.get("isError", False)),
            content=content,
            structured=wire.get("structuredContent"),
        )
