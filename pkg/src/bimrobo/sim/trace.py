"""Simulation trace: fixed-timestep state samples plus timestamped events, stored as JSON lines."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

import numpy as np

from ..geometry import Point3, Pose

TRACE_FORMAT = "bimrobo-trace"
TRACE_VERSION = 1

EVENT_KINDS = ("action_start", "action_end", "attach", "detach", "reorient", "install", "failure")


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class Tick:
    t: float
    robot: Pose
    arm_pose: str
    installed: tuple[str, ...] = ()
    agents: Mapping[str, Pose] = field(default_factory=dict)
    speed_cap: float = 0.0
    attached: str | None = None
    orientation: str | None = None
    pick_point: Point3 | None = None
    object_pose: Pose | None = None
    near: tuple[str, ...] = ()


@dataclass(frozen=True)
class Event:
    t: float
    seq: int
    kind: str
    payload: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise TraceError(f"unknown event kind {self.kind!r}")


@dataclass
class Trace:
    header: dict[str, Any]
    ticks: list[Tick] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)

    @property
    def robot_id(self) -> str:
        return self.header.get("robot_id") or "robot"

    @property
    def agent_ids(self) -> list[str]:
        return [a["agent_id"] for a in self.header.get("agents", [])]

    def agent_roles(self) -> dict[str, str]:
        return {a["agent_id"]: a.get("role", "") for a in self.header.get("agents", [])}

    def positions(self, agent_id: str) -> np.ndarray:
        """(n_ticks, 2) XY positions; ``agent_id`` may be the robot id."""
        if agent_id == self.robot_id:
            return np.array([(k.robot.x, k.robot.y) for k in self.ticks], dtype=float).reshape(-1, 2)
        if agent_id not in self.agent_ids:
            known = ", ".join([self.robot_id] + self.agent_ids)
            raise KeyError(f"unknown agent {agent_id!r}; trace has: {known}")
        return np.array([(k.agents[agent_id].x, k.agents[agent_id].y) for k in self.ticks],
                        dtype=float).reshape(-1, 2)

    def times(self) -> np.ndarray:
        return np.array([k.t for k in self.ticks], dtype=float)

    def events_of(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]


def _pose(p: Pose | None):
    return None if p is None else p.as_list()


def _tick_record(k: Tick) -> dict[str, Any]:
    return {
        "type": "tick",
        "t": k.t,
        "robot": k.robot.as_list(),
        "arm": k.arm_pose,
        "attached": k.attached,
        "orientation": k.orientation,
        "pick": list(k.pick_point) if k.pick_point is not None else None,
        "object": _pose(k.object_pose),
        "installed": list(k.installed),
        "agents": {a: p.as_list() for a, p in k.agents.items()},
        "speed_cap": k.speed_cap,
        "near": list(k.near),
    }


def _event_record(e: Event) -> dict[str, Any]:
    return {"type": "event", "t": e.t, "seq": e.seq, "kind": e.kind, "payload": e.payload}


def iter_records(trace: Trace) -> Iterator[dict[str, Any]]:
    """Header, then ticks and events merged by time; at equal times events come first."""
    yield {"type": "header", "format": TRACE_FORMAT, "version": TRACE_VERSION, **trace.header}
    i = j = 0
    ticks, events = trace.ticks, trace.events
    while i < len(ticks) or j < len(events):
        if j < len(events) and (i >= len(ticks) or events[j].t <= ticks[i].t):
            yield _event_record(events[j])
            j += 1
        else:
            yield _tick_record(ticks[i])
            i += 1


def dumps_trace(trace: Trace) -> str:
    # json renders floats with repr, so identical traces give identical bytes
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n"
                   for r in iter_records(trace))


def write_trace(trace: Trace, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in iter_records(trace):
            fh.write(json.dumps(r, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def _read_tick(r: Mapping[str, Any]) -> Tick:
    return Tick(
        t=float(r["t"]),
        robot=Pose.from_seq(r["robot"]),
        arm_pose=r["arm"],
        installed=tuple(r["installed"]),
        agents={a: Pose.from_seq(p) for a, p in r["agents"].items()},
        speed_cap=float(r["speed_cap"]),
        attached=r["attached"],
        orientation=r["orientation"],
        pick_point=tuple(r["pick"]) if r["pick"] is not None else None,
        object_pose=Pose.from_seq(r["object"]) if r["object"] is not None else None,
        near=tuple(r["near"]),
    )


def read_trace(path: str | os.PathLike) -> Trace:
    path = os.fspath(path)
    header: dict[str, Any] | None = None
    ticks: list[Tick] = []
    events: list[Event] = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                r = json.loads(line)
                kind = r["type"]
                if kind == "header":
                    if r.get("format") != TRACE_FORMAT:
                        raise TraceError("not a trace file")
                    header = {k: v for k, v in r.items() if k not in ("type", "format", "version")}
                elif kind == "tick":
                    ticks.append(_read_tick(r))
                elif kind == "event":
                    events.append(Event(float(r["t"]), int(r["seq"]), r["kind"], r["payload"]))
                else:
                    raise TraceError(f"unknown record type {kind!r}")
            except (KeyError, TypeError, ValueError) as exc:
                raise TraceError(f"{path}:{n}: malformed record: {exc}") from None
    if header is None:
        raise TraceError(f"{path}: missing header record")
    return Trace(header, ticks, events)
