"""Device bus for the simulated plant.

One JSON object per line over a local stream socket. Requests carry
{"op", "node"|"action", "args", "cid"}; every request gets exactly one
reply {"cid", "value"|"status"|"error"}. Goals additionally produce
feedback lines {"cid", "feedback": {...}} and exactly one terminal result
{"cid", "status": "success"|"failure", ...}, pushed on the connection that
sent the goal.

Addresses:
  Drill.Start (call), Drill.State (read), Drill.Reset (call),
  Drill.Fault (call), Robot.Transport (goal),
  Clock.Advance (call), Clock.Read (read), Plant.Snapshot (read)
"""

from __future__ import annotations

import itertools
import json
import logging
import socket
import socketserver
import threading
from typing import Callable, Optional

from .plant import PlantSim

log = logging.getLogger(__name__)

DEFAULT_BUS_ADDR = "127.0.0.1:7410"
BUS_ADDR_ENV = "DEVICE_BUS_ADDR"


class BusError(Exception):
    pass


class BusTimeout(BusError):
    pass


class BusDispatcher:
    """Routes bus request objects onto the simulation.

    push(obj) delivers asynchronous messages (goal feedback/results) back to
    the connection the goal originated on. With record=True every request,
    reply and push is appended to .transcript in processing order, which is
    what the determinism checks compare.
    """

    def __init__(self, sim: PlantSim, record: bool = False):
        self.sim = sim
        self.transcript: Optional[list] = [] if record else None
        self._lock = threading.Lock()

    def execute(self, request: dict, push: Callable[[dict], None]) -> dict:
        with self._lock:
            reply = self._route(request, self._recording(push))
            self._record("reply", reply)
            return reply

    def _recording(self, push: Callable[[dict], None]) -> Callable[[dict], None]:
        def wrapped(obj: dict) -> None:
            self._record("push", obj)
            push(obj)
        return wrapped

    def _record(self, kind: str, obj: dict) -> None:
        if self.transcript is not None:
            self.transcript.append((kind, json.dumps(obj, sort_keys=True)))

    def _route(self, request: dict, push: Callable[[dict], None]) -> dict:
        if not isinstance(request, dict):
            return {"cid": None, "error": "malformed_request"}
        cid = request.get("cid")
        self._record("request", request)
        op = request.get("op")
        args = request.get("args") or {}
        if not isinstance(args, dict):
            return {"cid": cid, "error": "invalid_args"}

        if op == "read":
            node = request.get("node")
            if node == "Drill.State":
                return {"cid": cid, "value": self.sim.drill_read_state()}
            if node == "Clock.Read":
                return {"cid": cid, "value": self.sim.clock}
            if node == "Plant.Snapshot":
                return {"cid": cid, "value": self.sim.snapshot()}
            return {"cid": cid, "error": "unknown_node"}

        if op == "call":
            node = request.get("node")
            if node == "Drill.Start":
                rejection = self.sim.drill_start(
                    args.get("workpiece"), args.get("rpm"), args.get("diameter_mm")
                )
                if rejection:
                    return {"cid": cid, "error": rejection}
                return {"cid": cid, "status": "accepted"}
            if node == "Drill.Reset":
                rejection = self.sim.drill_reset()
                if rejection:
                    return {"cid": cid, "error": rejection}
                return {"cid": cid, "status": "ok"}
            if node == "Drill.Fault":
                self.sim.drill_fault(str(args.get("reason", "fault")))
                return {"cid": cid, "status": "ok"}
            if node == "Clock.Advance":
                ms = args.get("ms")
                if not isinstance(ms, int) or isinstance(ms, bool) or ms < 0:
                    return {"cid": cid, "error": "invalid_args"}
                return {"cid": cid, "value": self.sim.advance(ms)}
            return {"cid": cid, "error": "unknown_node"}

        if op == "goal":
            action = request.get("action")
            if action == "Robot.Transport":
                immediate: list[dict] = []
                accepted = False

                def feedback(payload: dict) -> None:
                    push({"cid": cid, "feedback": payload})

                def result(payload: dict) -> None:
                    # before acceptance the result becomes the reply itself;
                    # afterwards it is pushed like any async message
                    if accepted:
                        push({"cid": cid, **payload})
                    else:
                        immediate.append(payload)

                outcome = self.sim.robot_transport_goal(
                    args.get("workpiece"), args.get("to"), feedback, result
                )
                if outcome == "done":
                    return {"cid": cid, **immediate[0]}
                accepted = True
                return {"cid": cid, "status": "accepted"}
            return {"cid": cid, "error": "unknown_action"}

        if op == "write":
            return {"cid": cid, "error": "unknown_node"}  # no writable nodes
        return {"cid": cid, "error": "unknown_op"}


class _BusConnectionHandler(socketserver.StreamRequestHandler):
    disable_nagle_algorithm = True

    def handle(self):
        wlock = threading.Lock()

        def push(obj: dict) -> None:
            line = json.dumps(obj, separators=(",", ":")) + "\n"
            try:
                with wlock:
                    self.wfile.write(line.encode("utf-8"))
                    self.wfile.flush()
            except OSError:
                log.debug("push to closed bus connection dropped")

        dispatcher: BusDispatcher = self.server.dispatcher  # type: ignore[attr-defined]
        for raw in self.rfile:
            if not raw.strip():
                continue
            try:
                request = json.loads(raw)
            except json.JSONDecodeError:
                push({"cid": None, "error": "parse_error"})
                continue
            push(dispatcher.execute(request, push))


class BusServer:
    """Line-delimited JSON bus endpoint in front of one PlantSim."""

    def __init__(self, sim: PlantSim, listen: str = "127.0.0.1:0", record: bool = False):
        self.dispatcher = BusDispatcher(sim, record=record)
        host, _, port = listen.rpartition(":")
        self._server = socketserver.ThreadingTCPServer(
            (host or "127.0.0.1", int(port)), _BusConnectionHandler, bind_and_activate=False
        )
        self._server.allow_reuse_address = True
        self._server.daemon_threads = True
        self._server.dispatcher = self.dispatcher  # type: ignore[attr-defined]
        try:
            self._server.server_bind()
            self._server.server_activate()
        except OSError as exc:
            self._server.server_close()
            raise BusError(f"cannot bind bus on {listen}: {exc}") from exc
        self._thread = threading.Thread(
            target=lambda: self._server.serve_forever(poll_interval=0.05),
            daemon=True,
            name="bus",
        )
        self._thread.start()

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"{host}:{port}"

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)


class BusClient:
    """One connection to the bus. Synchronous request/reply by correlation
    id; out-of-band feedback/result lines are stashed per cid and collected
    with take_async()."""

    def __init__(self, address: str, timeout: float = 10.0):
        host, _, port = address.rpartition(":")
        try:
            self._sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)
        except OSError as exc:
            raise BusError(f"cannot reach bus at {address}: {exc}") from exc
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._rfile = self._sock.makefile("r", encoding="utf-8")
        self._cids = itertools.count(1)
        self._pending: dict = {}
        self._lock = threading.Lock()

    def _read_obj(self) -> dict:
        try:
            line = self._rfile.readline()
        except socket.timeout as exc:
            raise BusTimeout("bus read timed out") from exc
        if not line:
            raise BusError("bus connection closed")
        return json.loads(line)

    def request(self, op: str, address: str, args: Optional[dict] = None) -> dict:
        """Send one request and return its reply, stashing unrelated lines."""
        with self._lock:
            cid = next(self._cids)
            key = "action" if op == "goal" else "node"
            message = {"op": op, key: address, "args": args or {}, "cid": cid}
            self._sock.sendall((json.dumps(message, separators=(",", ":")) + "\n").encode("utf-8"))
            while True:
                obj = self._read_obj()
                if obj.get("cid") == cid and "feedback" not in obj:
                    return obj
                self._pending.setdefault(obj.get("cid"), []).append(obj)

    def take_async(self, cid) -> list[dict]:
        """Drain stashed feedback/result messages for one correlation id."""
        with self._lock:
            return self._pending.pop(cid, [])

    def read(self, node: str):
        reply = self.request("read", node)
        if "error" in reply:
            raise BusError(f"read {node}: {reply['error']}")
        return reply["value"]

    def call(self, node: str, args: Optional[dict] = None) -> dict:
        return self.request("call", node, args)

    def goal(self, action: str, args: Optional[dict] = None) -> dict:
        return self.request("goal", action, args)

    def close(self) -> None:
        try:
            self._rfile.close()
        finally:
            self._sock.close()

    def __enter__(self) -> "BusClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def main(argv: Optional[list] = None) -> int:
    """Run a standalone plant bus (mcp-plant)."""
    import argparse
    import os
    import sys

    import yaml

    parser = argparse.ArgumentParser(prog="mcp-plant")
    parser.add_argument(
        "--listen",
        default=os.environ.get(BUS_ADDR_ENV, DEFAULT_BUS_ADDR),
        help=f"host:port to listen on (env {BUS_ADDR_ENV})",
    )
    parser.add_argument("--layout", help="YAML file with workpieces/robot overrides")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, stream=sys.stderr)
    workpieces = None
    robot_location = "dock"
    if args.layout:
        with open(args.layout, "r", encoding="utf-8") as handle:
            layout = yaml.safe_load(handle) or {}
        workpieces = layout.get("workpieces")
        robot_location = (layout.get("robot") or {}).get("location", "dock")

    sim = PlantSim(workpieces=workpieces, robot_location=robot_location)
    server = BusServer(sim, listen=args.listen)
    print(f"device bus listening on {server.address}", flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
