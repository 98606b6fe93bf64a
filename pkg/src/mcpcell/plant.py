"""Deterministic discrete-event simulation of the desk-scale shop floor.

Time is logical: the clock only moves when advance() is called, so identical
command sequences always replay to identical states. The drill follows an
explicit transition table (recorded per transition for model checking) and
the mobile robot executes one transport goal at a time, emitting position
feedback and exactly one terminal result through callbacks supplied with
the goal.
"""

from __future__ import annotations

import heapq
import itertools
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

STATIONS = ("storage", "drill_station", "assembly_station", "dock")

DRILL_STATES = ("Idle", "Starting", "Executing", "Completing", "Complete", "Error")

# the only moves the drill may ever make; anything else is a bug
LEGAL_DRILL_TRANSITIONS = frozenset(
    [
        ("Idle", "Starting"),
        ("Starting", "Executing"),
        ("Executing", "Completing"),
        ("Completing", "Complete"),
        ("Complete", "Idle"),
        ("Error", "Idle"),
    ]
    + [(state, "Error") for state in DRILL_STATES if state != "Error"]
)

DRILL_PHASE_MS = {"Starting": 200, "Executing": 1600, "Completing": 200}  # total 2000
ROBOT_HOP_MS = 1000


class IllegalTransition(Exception):
    pass


@dataclass
class Workpiece:
    material: str
    location: Optional[str]  # None while carried by the robot
    holes: list = field(default_factory=list)


@dataclass
class DrillJob:
    job_id: int
    workpiece: str
    rpm: int
    diameter_mm: float


@dataclass
class DrillMachine:
    state: str = "Idle"
    current_job: Optional[DrillJob] = None
    last_error: Optional[str] = None


@dataclass
class TransportGoal:
    workpiece: str
    to: str
    emit_feedback: Callable[[dict], None]
    emit_result: Callable[[dict], None]


class PlantSim:
    """Single source of simulated truth; all public methods are serialized
    behind one lock so callers observe a total order."""

    def __init__(self, workpieces: Optional[dict] = None, robot_location: str = "dock"):
        self._lock = threading.RLock()
        self.clock = 0
        self.workpieces: dict[str, Workpiece] = {}
        for wp_id, spec in (workpieces or {"wp1": {"location": "drill_station", "material": "steel"}}).items():
            location = spec["location"]
            if location not in STATIONS:
                raise ValueError(f"unknown station {location!r} for {wp_id}")
            self.workpieces[wp_id] = Workpiece(material=spec.get("material", "steel"), location=location)
        if robot_location not in STATIONS:
            raise ValueError(f"unknown robot station {robot_location!r}")
        self.robot_location = robot_location
        self.robot_carrying: Optional[str] = None
        self.drill = DrillMachine()
        self.transitions: list[tuple[str, str]] = []  # (from, to) audit log
        self._events: list[tuple[int, int, Callable[[], None]]] = []
        self._seq = itertools.count()
        self._job_ids = itertools.count(1)
        self._robot_goal: Optional[TransportGoal] = None

    # --- clock ---------------------------------------------------------

    def advance(self, ms: int) -> int:
        """Move logical time forward, firing due events in order."""
        if not isinstance(ms, int) or isinstance(ms, bool) or ms < 0:
            raise ValueError("ms must be a non-negative integer")
        with self._lock:
            target = self.clock + ms
            while self._events and self._events[0][0] <= target:
                due, _, callback = heapq.heappop(self._events)
                self.clock = due
                callback()
            self.clock = target
            return self.clock

    def _at(self, delay_ms: int, callback: Callable[[], None]) -> None:
        heapq.heappush(self._events, (self.clock + delay_ms, next(self._seq), callback))

    # --- drill ---------------------------------------------------------

    def _drill_to(self, new_state: str) -> None:
        pair = (self.drill.state, new_state)
        if pair not in LEGAL_DRILL_TRANSITIONS:
            raise IllegalTransition(f"{pair[0]} -> {pair[1]}")
        self.transitions.append(pair)
        self.drill.state = new_state

    def drill_start(self, workpiece: str, rpm, diameter_mm) -> Optional[str]:
        """Begin a drilling job; returns a rejection reason or None."""
        with self._lock:
            if self.drill.state != "Idle":
                return "busy"
            wp = self.workpieces.get(workpiece)
            if wp is None or wp.location != "drill_station":
                return "workpiece_not_present"
            if not isinstance(rpm, int) or isinstance(rpm, bool) or rpm <= 0:
                return "invalid_rpm"
            if not isinstance(diameter_mm, (int, float)) or isinstance(diameter_mm, bool):
                return "invalid_diameter"

            job = DrillJob(next(self._job_ids), workpiece, rpm, float(diameter_mm))
            self.drill.current_job = job
            self._drill_to("Starting")

            def phase(expected_from: str, to: str, then: Optional[Callable[[], None]] = None):
                def fire():
                    if self.drill.current_job is not job or self.drill.state != expected_from:
                        return  # job was aborted by a fault/reset
                    self._drill_to(to)
                    if then:
                        then()
                return fire

            def complete():
                self.workpieces[job.workpiece].holes.append(
                    {"diameter_mm": job.diameter_mm, "rpm_used": job.rpm}
                )

            t_exec = DRILL_PHASE_MS["Starting"]
            t_done = t_exec + DRILL_PHASE_MS["Executing"]
            t_complete = t_done + DRILL_PHASE_MS["Completing"]
            self._at(t_exec, phase("Starting", "Executing"))
            self._at(t_done, phase("Executing", "Completing"))
            self._at(t_complete, phase("Completing", "Complete", complete))
            return None

    def drill_read_state(self) -> str:
        with self._lock:
            return self.drill.state

    def drill_reset(self) -> Optional[str]:
        with self._lock:
            if self.drill.state not in ("Complete", "Error"):
                return "illegal_transition"
            self._drill_to("Idle")
            self.drill.current_job = None
            self.drill.last_error = None
            return None

    def drill_fault(self, reason: str = "fault") -> None:
        """Force the machine into Error (safety stop, wire break, ...)."""
        with self._lock:
            if self.drill.state == "Error":
                return
            self._drill_to("Error")
            self.drill.current_job = None
            self.drill.last_error = reason

    # --- robot ---------------------------------------------------------

    def robot_transport_goal(
        self,
        workpiece: str,
        to: str,
        emit_feedback: Callable[[dict], None],
        emit_result: Callable[[dict], None],
    ) -> Optional[str]:
        """Start a transport goal.

        Returns None when the goal was accepted and will finish through the
        callbacks, or emits an immediate terminal result (validation
        failure / no-op) and returns "done".
        """
        with self._lock:
            if self._robot_goal is not None:
                emit_result({"status": "failure", "error": "busy"})
                return "done"
            wp = self.workpieces.get(workpiece)
            if wp is None:
                emit_result({"status": "failure", "error": "unknown_workpiece"})
                return "done"
            if to not in STATIONS:
                emit_result({"status": "failure", "error": "unknown_station"})
                return "done"
            if wp.location == to:
                emit_result({"status": "success", "note": "no_op", "location": to})
                return "done"

            goal = TransportGoal(workpiece, to, emit_feedback, emit_result)
            self._robot_goal = goal

            legs: list[str] = []
            if self.robot_location != wp.location:
                legs.append(wp.location)
            else:
                self._pick(goal)
            legs.append(to)

            delay = 0
            for station in legs:
                delay += ROBOT_HOP_MS
                self._at(delay, self._arrival(goal, station))
            return None

    def _pick(self, goal: TransportGoal) -> None:
        wp = self.workpieces[goal.workpiece]
        wp.location = None
        self.robot_carrying = goal.workpiece

    def _arrival(self, goal: TransportGoal, station: str) -> Callable[[], None]:
        def fire():
            if self._robot_goal is not goal:
                return
            self.robot_location = station
            if self.robot_carrying is None:
                self._pick(goal)
                goal.emit_feedback({"position": station})
                return
            if station == goal.to:
                self.workpieces[goal.workpiece].location = station
                self.robot_carrying = None
                self._robot_goal = None
                goal.emit_feedback({"position": station})
                goal.emit_result({"status": "success", "location": station})
        return fire

    # --- observation ----------------------------------------------------

    def snapshot(self) -> dict:
        with self._lock:
            job = self.drill.current_job
            return {
                "clock": self.clock,
                "stations": list(STATIONS),
                "workpieces": {
                    wp_id: {
                        "location": wp.location,
                        "material": wp.material,
                        "holes": [dict(h) for h in wp.holes],
                    }
                    for wp_id, wp in self.workpieces.items()
                },
                "robot": {"location": self.robot_location, "carrying": self.robot_carrying},
                "drill": {
                    "state": self.drill.state,
                    "current_job": (
                        {
                            "workpiece": job.workpiece,
                            "rpm": job.rpm,
                            "diameter_mm": job.diameter_mm,
                        }
                        if job
                        else None
                    ),
                    "last_error": self.drill.last_error,
                },
            }

    def workpiece_ids(self) -> list[str]:
        with self._lock:
            return sorted(self.workpieces)
