"""LLM-backed planner: OpenAI-style chat completions with tool calling.

The catalog is translated into the endpoint's tool-definition format and the
conversation tracks the session trace; there is one fixed system preamble
and no per-task prompt engineering. A file:// endpoint replays a recorded
exchange instead of calling out, which is how the LLM path runs in CI.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from typing import Optional

import requests

from .catalog import Catalog
from .session import PlannerContext, PlannerDecision

log = logging.getLogger(__name__)

LLM_BASE_URL_ENV = "LLM_BASE_URL"
LLM_API_KEY_ENV = "LLM_API_KEY"
LLM_MODEL_ENV = "LLM_MODEL"

SYSTEM_PREAMBLE = (
    "You are the orchestrator of a small manufacturing cell. Plan and execute "
    "the user's task by calling the available tools; their descriptions state "
    "all constraints and required orderings. Call one tool at a time and take "
    "parameter values from the task or from earlier tool results. If you need "
    "a decision from the user, reply with one line starting with 'CLARIFY: '. "
    "When the task is fully complete, reply with one line starting with 'DONE: '."
)


class LlmUnavailable(Exception):
    pass


@dataclass
class LlmConfig:
    base_url: str
    api_key: str = ""
    model: str = "desk-llm"

    @classmethod
    def from_env(cls) -> Optional["LlmConfig"]:
        base_url = os.environ.get(LLM_BASE_URL_ENV, "").strip()
        if not base_url:
            return None
        return cls(
            base_url=base_url,
            api_key=os.environ.get(LLM_API_KEY_ENV, ""),
            model=os.environ.get(LLM_MODEL_ENV, "desk-llm"),
        )


def llm_available() -> bool:
    return LlmConfig.from_env() is not None


def tool_definitions(catalog: Catalog) -> list[dict]:
    return [
        {
            "type": "function",
            "function": {
                "name": tool.name,
                "description": tool.description,
                "parameters": tool.input_schema,
            },
        }
        for entry in catalog.entries.values()
        for tool in entry.tools
    ]


class HttpChatTransport:
    def __init__(self, config: LlmConfig):
        self.config = config
        self.requests: list[dict] = []

    def complete(self, messages: list[dict], tools: list[dict]) -> dict:
        body = {"model": self.config.model, "messages": messages, "tools": tools}
        self.requests.append(body)
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=120)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            raise LlmUnavailable(f"chat endpoint failed: {exc}") from exc


class PlaybackTransport:
    """Replays assistant messages recorded in a JSON file ({"responses":
    [...]}), in order. Requests are still captured for inspection."""

    def __init__(self, path: str):
        with open(path, "r", encoding="utf-8") as handle:
            recorded = json.load(handle)
        self._responses = list(recorded["responses"])
        self._cursor = 0
        self.requests: list[dict] = []

    def complete(self, messages: list[dict], tools: list[dict]) -> dict:
        self.requests.append({"messages": messages, "tools": tools})
        if self._cursor >= len(self._responses):
            raise LlmUnavailable("playback exhausted")
        message = self._responses[self._cursor]
        self._cursor += 1
        return message


def make_transport(config: LlmConfig):
    if config.base_url.startswith("file://"):
        return PlaybackTransport(config.base_url[len("file://"):])
    return HttpChatTransport(config)


class LlmPlanner:
    """Planner callable that holds one conversation per session."""

    def __init__(self, transport):
        self.transport = transport
        self.messages: list[dict] = []
        self._seen_ts = -1
        self._last_tool_call_id: Optional[str] = None
        self._call_counter = 0

    def __call__(self, ctx: PlannerContext) -> PlannerDecision:
        if not self.messages:
            self.messages.append({"role": "system", "content": SYSTEM_PREAMBLE})
            self.messages.append({"role": "user", "content": self._task_text(ctx)})
        self._absorb_events(ctx)
        tools = tool_definitions(ctx.catalog)

        for attempt in range(2):
            try:
                message = self.transport.complete(list(self.messages), tools)
            except LlmUnavailable as exc:
                log.warning("llm transport failed: %s", exc)
                return PlannerDecision.fail("llm_unavailable")
            decision = self._map_message(ctx, message)
            if decision is not None:
                return decision
            if attempt == 0:
                self.messages.append(
                    {
                        "role": "user",
                        "content": "Your reply was not usable. Respond with a tool call, "
                        "or one line starting with 'CLARIFY: ' or 'DONE: '.",
                    }
                )
        return PlannerDecision.fail("llm_malformed")

    def _task_text(self, ctx: PlannerContext) -> str:
        if ctx.task.kind == "free_text":
            return ctx.task.free_text or ""
        return "Execute this manufacturing task: " + json.dumps(
            ctx.task.to_dict(), sort_keys=True
        )

    def _absorb_events(self, ctx: PlannerContext) -> None:
        """Feed trace events the model has not seen yet into the chat."""
        for event in ctx.events:
            if event["ts"] <= self._seen_ts:
                continue
            self._seen_ts = event["ts"]
            if event["type"] == "tool_result":
                payload = {
                    "isError": event.get("is_error", False),
                    "content": event.get("content", []),
                    "structuredContent": event.get("structured"),
                }
                self.messages.append(
                    {
                        "role": "tool",
                        "tool_call_id": self._last_tool_call_id or "call_0",
                        "content": json.dumps(payload, sort_keys=True),
                    }
                )
            elif event["type"] == "clarification_answer":
                self.messages.append(
                    {"role": "user", "content": f"User answer: {event.get('answer')}"}
                )
            elif event["type"] == "plan_note" and event.get("note") == "plant_observation":
                self.messages.append(
                    {
                        "role": "user",
                        "content": "Current plant state: "
                        + json.dumps(event.get("data", {}), sort_keys=True),
                    }
                )

    def _map_message(self, ctx: PlannerContext, message: dict) -> Optional[PlannerDecision]:
        tool_calls = message.get("tool_calls") or []
        if tool_calls:
            call = tool_calls[0]
            function = call.get("function", {})
            name = function.get("name")
            raw_args = function.get("arguments", "{}")
            try:
                args = json.loads(raw_args) if isinstance(raw_args, str) else dict(raw_args)
            except (ValueError, TypeError):
                log.warning("unparseable tool arguments: %r", raw_args)
                return None
            found = ctx.catalog.find_tool(name) if name else None
            if found is None:
                log.warning("model called unknown tool %r", name)
                return None
            self._call_counter += 1
            self._last_tool_call_id = call.get("id") or f"call_{self._call_counter}"
            self.messages.append(
                {
                    "role": "assistant",
                    "content": message.get("content"),
                    "tool_calls": [
                        {
                            "id": self._last_tool_call_id,
                            "type": "function",
                            "function": {"name": name, "arguments": raw_args},
                        }
                    ],
                }
            )
            return PlannerDecision.call_tool(name, args, server=found[0])

        content = (message.get("content") or "").strip()
        if content.startswith("CLARIFY:"):
            self.messages.append({"role": "assistant", "content": content})
            return PlannerDecision.clarify(content[len("CLARIFY:"):].strip())
        if content.startswith("DONE:"):
            self.messages.append({"role": "assistant", "content": content})
            return PlannerDecision.done(content[len("DONE:"):].strip())
        log.warning("unusable model reply: %r", content[:200])
        return None


def llm_plan_factory(config: Optional[LlmConfig] = None) -> LlmPlanner:
    """Build a fresh per-session planner from explicit or env config."""
    config = config or LlmConfig.from_env()
    if config is None:
        raise LlmUnavailable(f"{LLM_BASE_URL_ENV} is not configured")
    return LlmPlanner(make_transport(config))
