"""Device-bus wire behavior over real sockets plus dispatcher-level checks."""

import json
import socket
import threading

import pytest

from mcpcell.bus import BusClient, BusDispatcher, BusError, BusServer
from mcpcell.plant import PlantSim


@pytest.fixture()
def stack():
    sim = PlantSim(workpieces={"wp1": {"location": "drill_station", "material": "aluminum"}})
    server = BusServer(sim, record=True)
    client = BusClient(server.address)
    yield sim, server, client
    client.close()
    server.stop()


def test_read_initial_drill_state(stack):
    _, _, client = stack
    assert client.read("Drill.State") == "Idle"


def test_drill_start_then_polling_reaches_complete(stack):
    _, _, client = stack
    reply = client.call("Drill.Start", {"workpiece": "wp1", "rpm": 3183, "diameter_mm": 10})
    assert reply["status"] == "accepted"
    seen = []
    for _ in range(25):
        client.call("Clock.Advance", {"ms": 100})
        state = client.read("Drill.State")
        if not seen or seen[-1] != state:
            seen.append(state)
        if state == "Complete":
            break
    assert "Executing" in seen
    assert seen[-1] == "Complete"
    assert client.call("Drill.Reset", {})["status"] == "ok"


def test_unknown_address_is_error_reply(stack):
    _, _, client = stack
    assert client.call("Nope.X", {})["error"] == "unknown_node"
    assert client.request("read", "Nope.Y")["error"] == "unknown_node"
    assert client.goal("Nope.Z", {})["error"] == "unknown_action"
    assert client.request("write", "Drill.State", {"value": 1})["error"] == "unknown_node"
    assert client.request("frobnicate", "Drill.State")["error"] == "unknown_op"


def test_goal_feedback_and_result_pushed_to_origin_connection(stack):
    sim, server, client = stack
    sim.workpieces["wp1"].location = "storage"
    reply = client.goal("Robot.Transport", {"workpiece": "wp1", "to": "drill_station"})
    assert reply["status"] == "accepted"
    cid = reply["cid"]
    while True:
        advanced = client.call("Clock.Advance", {"ms": 500})
        assert "value" in advanced
        messages = client.take_async(cid)
        if any("status" in m for m in messages):
            feedback = [m["feedback"] for m in messages if "feedback" in m]
            result = [m for m in messages if "status" in m][0]
            break
    assert result == {"cid": cid, "status": "success", "location": "drill_station"}
    assert {"position": "drill_station"} in feedback


def test_goal_no_op_is_immediate_result(stack):
    _, _, client = stack
    reply = client.goal("Robot.Transport", {"workpiece": "wp1", "to": "drill_station"})
    assert reply["status"] == "success"
    assert reply["note"] == "no_op"


def test_goal_validation_failure_is_immediate_result(stack):
    _, _, client = stack
    reply = client.goal("Robot.Transport", {"workpiece": "wp1", "to": "paint_station"})
    assert reply == {"cid": reply["cid"], "status": "failure", "error": "unknown_station"}


def test_plant_snapshot_node(stack):
    _, _, client = stack
    snap = client.read("Plant.Snapshot")
    assert snap["workpieces"]["wp1"]["location"] == "drill_station"
    assert snap["drill"]["state"] == "Idle"
    assert snap["robot"] == {"location": "dock", "carrying": None}


def test_malformed_line_gets_parse_error_and_connection_survives(stack):
    _, server, _ = stack
    host, _, port = server.address.rpartition(":")
    with socket.create_connection((host, int(port)), timeout=5) as raw:
        raw.sendall(b"{nope\n")
        rfile = raw.makefile("r")
        assert json.loads(rfile.readline()) == {"cid": None, "error": "parse_error"}
        raw.sendall(b'{"op":"read","node":"Clock.Read","cid":1}\n')
        assert json.loads(rfile.readline()) == {"cid": 1, "value": 0}


def test_two_connections_feedback_goes_to_goal_origin(stack):
    sim, server, client = stack
    sim.workpieces["wp1"].location = "storage"
    other = BusClient(server.address)
    try:
        reply = client.goal("Robot.Transport", {"workpiece": "wp1", "to": "assembly_station"})
        cid = reply["cid"]
        # a different connection drives the clock; pushes must still reach ours
        other.call("Clock.Advance", {"ms": 5000})
        other_reply = other.call("Clock.Advance", {"ms": 100})
        assert "value" in other_reply
        assert other.take_async(cid) == []
        # our connection sees the messages on its next read
        ping = client.read("Clock.Read")
        assert ping == 5100
        messages = client.take_async(cid)
        assert [m for m in messages if "status" in m][0]["status"] == "success"
    finally:
        other.close()


def test_dispatcher_transcript_is_deterministic():
    def run():
        sim = PlantSim(workpieces={"wp1": {"location": "storage", "material": "steel"}})
        dispatcher = BusDispatcher(sim, record=True)
        pushes = []
        push = pushes.append
        commands = [
            {"op": "goal", "action": "Robot.Transport", "args": {"workpiece": "wp1", "to": "drill_station"}, "cid": 1},
            {"op": "call", "node": "Clock.Advance", "args": {"ms": 2500}, "cid": 2},
            {"op": "call", "node": "Drill.Start", "args": {"workpiece": "wp1", "rpm": 955, "diameter_mm": 10}, "cid": 3},
            {"op": "call", "node": "Clock.Advance", "args": {"ms": 2000}, "cid": 4},
            {"op": "read", "node": "Drill.State", "cid": 5},
            {"op": "call", "node": "Drill.Reset", "args": {}, "cid": 6},
            {"op": "read", "node": "Plant.Snapshot", "cid": 7},
        ]
        for cmd in commands:
            dispatcher.execute(cmd, push)
        return dispatcher.transcript, pushes, sim.snapshot()

    first, second = run(), run()
    assert first == second
    assert any("success" in line for _, line in first[0] if _ == "push")
