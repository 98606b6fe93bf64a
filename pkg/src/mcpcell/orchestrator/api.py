"""Session manager and its HTTP surface for consoles and the harness.

POST /sessions starts a planner loop in its own thread; GET
/sessions/{id}/events streams the trace as newline-delimited JSON (resume
with ?from=N); POST /sessions/{id}/clarification answers the blocking
question; GET /plant proxies a snapshot from the device bus for display.
"""

from __future__ import annotations

import itertools
import json
import logging
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional
from urllib.parse import parse_qs, urlparse

from ..bus import BusClient, BusError
from .catalog import Catalog, discover
from .llm import LlmConfig, LlmUnavailable, llm_plan_factory
from .planner import deterministic_plan
from .session import (
    DEFAULT_STEP_BUDGET,
    SessionTrace,
    TaskSpec,
    TaskSpecError,
    run_session,
)

log = logging.getLogger(__name__)


class PlantObserver:
    """Fetches plant snapshots over the device bus (for /plant and the
    session-start observation note)."""

    def __init__(self, bus_addr: str):
        self.bus_addr = bus_addr
        self._client: Optional[BusClient] = None
        self._lock = threading.Lock()

    def __call__(self) -> dict:
        with self._lock:
            if self._client is None:
                self._client = BusClient(self.bus_addr)
            try:
                return self._client.read("Plant.Snapshot")
            except BusError:
                self._client = None
                raise


@dataclass
class SessionRecord:
    trace: SessionTrace
    task: TaskSpec
    thread: Optional[threading.Thread] = None
    pending: Optional[dict] = None
    _answer: Optional[object] = None
    _answered: threading.Event = field(default_factory=threading.Event)
    lock: threading.Lock = field(default_factory=threading.Lock)


class Conflict(Exception):
    pass


class UnknownSession(KeyError):
    pass


class SessionManager:
    """Owns the catalog and all running sessions."""

    def __init__(
        self,
        servers: dict,
        planner: str = "deterministic",
        bus_addr: Optional[str] = None,
        step_budget: int = DEFAULT_STEP_BUDGET,
        llm_config: Optional[LlmConfig] = None,
    ):
        self.servers = servers
        self.planner_kind = planner
        self.step_budget = step_budget
        self.llm_config = llm_config
        self.observer = PlantObserver(bus_addr) if bus_addr else None
        self.catalog: Optional[Catalog] = None
        self._records: dict[str, SessionRecord] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._stopping = False

    def start(self) -> Catalog:
        self.catalog = discover(self.servers)
        return self.catalog

    def _planner_for(self, kind: str):
        if kind == "llm":
            return llm_plan_factory(self.llm_config)
        return deterministic_plan

    def create_session(self, task_dict: dict, planner_kind: Optional[str] = None) -> str:
        if self.catalog is None:
            raise RuntimeError("discover() has not run; call start() first")
        task = TaskSpec.from_dict(task_dict)
        planner = self._planner_for(planner_kind or self.planner_kind)
        with self._lock:
            session_id = f"sess-{next(self._ids)}"
            record = SessionRecord(trace=SessionTrace(session_id), task=task)
            self._records[session_id] = record

        def clarifier(question, options, category):
            with record.lock:
                record.pending = {"question": question, "options": options, "category": category}
                record._answered.clear()
            while not self._stopping:
                if record._answered.wait(timeout=0.25):
                    with record.lock:
                        record.pending = None
                        return record._answer
            with record.lock:
                record.pending = None
            return None

        def runner():
            run_session(
                task,
                planner,
                self.catalog,
                clarifier=clarifier,
                plant_observer=self.observer,
                step_budget=self.step_budget,
                trace=record.trace,
                session_id=session_id,
            )

        record.thread = threading.Thread(target=runner, daemon=True, name=session_id)
        record.thread.start()
        return session_id

    def get(self, session_id: str) -> SessionRecord:
        record = self._records.get(session_id)
        if record is None:
            raise UnknownSession(session_id)
        return record

    def answer_clarification(self, session_id: str, answer) -> None:
        record = self.get(session_id)
        with record.lock:
            if record.pending is None:
                raise Conflict(f"session {session_id} has no pending clarification")
            record._answer = answer
            record._answered.set()

    def list_sessions(self) -> list[dict]:
        with self._lock:
            records = list(self._records.items())
        summaries = []
        for session_id, record in records:
            terminal = record.trace.terminal
            summaries.append(
                {
                    "session_id": session_id,
                    "task": record.task.to_dict(),
                    "terminal": terminal["type"] if terminal else None,
                    "pending_clarification": record.pending is not None,
                    "events": len(record.trace.snapshot()),
                }
            )
        return summaries

    def plant_snapshot(self) -> dict:
        if self.observer is None:
            raise BusError("no device bus configured")
        return self.observer()

    def stop(self) -> None:
        self._stopping = True
        for record in self._records.values():
            record._answered.set()
        for record in self._records.values():
            if record.thread is not None:
                record.thread.join(timeout=2)
        if self.catalog is not None:
            self.catalog.close()


class _SessionApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "mcpcell-orchestrator"
    disable_nagle_algorithm = True
    wbufsize = -1

    def log_message(self, fmt, *args):
        log.debug("api %s", fmt % args)

    @property
    def manager(self) -> SessionManager:
        return self.server.manager  # type: ignore[attr-defined]

    # -- plumbing ---------------------------------------------------------

    def _cors(self):
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _json(self, status: int, payload) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self._cors()
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError:
            raise ValueError("request body is not valid JSON")
        if not isinstance(parsed, dict):
            raise ValueError("request body must be a JSON object")
        return parsed

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    # -- routes -----------------------------------------------------------

    def do_POST(self):
        path = urlparse(self.path).path
        try:
            if path == "/sessions":
                body = self._read_body()
                task = body.get("task")
                if not isinstance(task, dict):
                    raise ValueError("body needs a 'task' object")
                session_id = self.manager.create_session(task, body.get("planner"))
                self._json(201, {"session_id": session_id})
                return
            parts = path.strip("/").split("/")
            if len(parts) == 3 and parts[0] == "sessions" and parts[2] == "clarification":
                body = self._read_body()
                if "answer" not in body:
                    raise ValueError("body needs an 'answer'")
                self.manager.answer_clarification(parts[1], body["answer"])
                self._json(200, {"status": "ok"})
                return
            self._json(404, {"error": "not_found"})
        except (ValueError, TaskSpecError) as exc:
            self._json(400, {"error": str(exc)})
        except UnknownSession:
            self._json(404, {"error": "unknown_session"})
        except Conflict as exc:
            self._json(409, {"error": str(exc)})
        except LlmUnavailable as exc:
            self._json(503, {"error": str(exc)})

    def do_GET(self):
        parsed = urlparse(self.path)
        path = parsed.path
        if path == "/plant":
            try:
                self._json(200, self.manager.plant_snapshot())
            except BusError as exc:
                self._json(503, {"error": str(exc)})
            return
        if path == "/sessions":
            self._json(200, self.manager.list_sessions())
            return
        parts = path.strip("/").split("/")
        if len(parts) == 3 and parts[0] == "sessions" and parts[2] == "events":
            try:
                record = self.manager.get(parts[1])
            except UnknownSession:
                self._json(404, {"error": "unknown_session"})
                return
            start = 0
            query = parse_qs(parsed.query)
            if "from" in query:
                try:
                    start = max(0, int(query["from"][0]))
                except ValueError:
                    self._json(400, {"error": "from must be an integer"})
                    return
            self._stream_events(record, start)
            return
        self._json(404, {"error": "not_found"})

    def _stream_events(self, record: SessionRecord, start: int) -> None:
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Cache-Control", "no-store")
        self.send_header("Connection", "close")
        self.end_headers()
        index = start
        while not getattr(self.server, "stopping", False):
            events = record.trace.wait_for(index)
            for event in events:
                self.wfile.write((json.dumps(event) + "\n").encode("utf-8"))
                index += 1
            if events:
                self.wfile.flush()
                if events[-1]["type"] in ("done", "failed"):
                    break
            elif record.trace.terminal is not None:
                break  # resumed past the end of a finished trace


class SessionApiHandle:
    def __init__(self, server: ThreadingHTTPServer, thread: threading.Thread):
        self._server = server
        self._thread = thread

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"{host}:{port}"

    @property
    def url(self) -> str:
        return f"http://{self.address}"

    def stop(self) -> None:
        self._server.stopping = True  # type: ignore[attr-defined]
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)


def serve_sessions(manager: SessionManager, listen: str = "127.0.0.1:0") -> SessionApiHandle:
    host, _, port = listen.rpartition(":")
    server = ThreadingHTTPServer((host or "127.0.0.1", int(port)), _SessionApiHandler)
    server.daemon_threads = True
    server.manager = manager  # type: ignore[attr-defined]
    server.stopping = False  # type: ignore[attr-defined]
    thread = threading.Thread(
        target=lambda: server.serve_forever(poll_interval=0.05), daemon=True, name="session-api"
    )
    thread.start()
    return SessionApiHandle(server, thread)


def main(argv: Optional[list] = None) -> int:
    import argparse
    import os
    import sys

    import yaml

    parser = argparse.ArgumentParser(prog="mcp-orchestrator")
    parser.add_argument("--config", required=True, help="YAML config (servers, bus, planner)")
    parser.add_argument("--listen", default="127.0.0.1:8800", help="session API host:port")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, stream=sys.stderr)
    with open(args.config, "r", encoding="utf-8") as handle:
        config = yaml.safe_load(handle) or {}

    manager = SessionManager(
        servers=config.get("servers", {}),
        planner=os.environ.get("PLANNER", config.get("planner", "deterministic")),
        bus_addr=config.get("bus"),
        step_budget=int(
            os.environ.get("STEP_BUDGET", config.get("step_budget", DEFAULT_STEP_BUDGET))
        ),
        llm_config=LlmConfig.from_env(),
    )
    catalog = manager.start()
    log.info("catalog: %s", {s: [t.name for t in e.tools] for s, e in catalog.entries.items()})
    handle = serve_sessions(manager, args.listen)
    print(f"session API listening on http://{handle.address}", flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        handle.stop()
        manager.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
