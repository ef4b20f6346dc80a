"""Open-loop scripted worker agents."""

from __future__ import annotations

import bisect
import math
import os
from dataclasses import dataclass
from functools import cached_property

from .._io import InputError, context, load_yaml_validated
from ..geometry import Pose


@dataclass(frozen=True)
class AgentScript:
    """Walks its waypoints at ``speed``, dwelling at each; ``loop`` returns to the first."""

    agent_id: str
    waypoints: tuple[tuple[Pose, float], ...]
    speed: float
    role: str = ""
    loop: bool = False

    def __post_init__(self) -> None:
        if not (self.speed > 0 and math.isfinite(self.speed)):
            raise ValueError(f"agent {self.agent_id}: speed must be positive")
        if not self.waypoints:
            raise ValueError(f"agent {self.agent_id}: needs at least one waypoint")
        if any(d < 0 for _, d in self.waypoints):
            raise ValueError(f"agent {self.agent_id}: negative dwell")

    @cached_property
    def _timeline(self) -> tuple[list[float], list[tuple]]:
        # pieces: (t0, kind, a, b, duration); dwell pieces have a == b
        pts = [p for p, _ in self.waypoints]
        dwell = [d for _, d in self.waypoints]
        order = list(range(len(pts)))
        if self.loop and len(pts) > 1:
            order.append(0)
        starts: list[float] = []
        pieces: list[tuple] = []
        t = 0.0
        for k, i in enumerate(order):
            if k > 0:
                a = pts[order[k - 1]]
                d = math.hypot(pts[i].x - a.x, pts[i].y - a.y) / self.speed
                if d > 0:
                    starts.append(t)
                    pieces.append(("move", a, pts[i], d))
                    t += d
            if k < len(order) - 1 or not self.loop:
                if dwell[i] > 0 or k == len(order) - 1:
                    starts.append(t)
                    pieces.append(("dwell", pts[i], pts[i], dwell[i]))
                    t += dwell[i]
        return starts, pieces

    @property
    def period(self) -> float:
        starts, pieces = self._timeline
        return starts[-1] + pieces[-1][3]

    def pose_at(self, t: float) -> Pose:
        starts, pieces = self._timeline
        period = self.period
        if self.loop and len(self.waypoints) > 1 and period > 0:
            t = math.fmod(t, period)
        elif t >= period:
            return pieces[-1][2]
        i = max(0, bisect.bisect_right(starts, t) - 1)
        kind, a, b, dur = pieces[i]
        if kind == "dwell" or dur <= 0:
            return a
        s = min(max((t - starts[i]) / dur, 0.0), 1.0)
        yaw = math.atan2(b.y - a.y, b.x - a.x)
        return Pose(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y), a.z + s * (b.z - a.z), yaw=yaw)


def load_agents(path: str | os.PathLike) -> list[AgentScript]:
    path = os.fspath(path)
    data, lines = load_yaml_validated(path, "agents")
    out: list[AgentScript] = []
    seen: set[str] = set()
    for i, raw in enumerate(data["agents"]):
        where = context(path, lines, ("agents", i))
        if raw["agent_id"] in seen:
            raise InputError(f"{where}: duplicate agent id {raw['agent_id']!r}")
        seen.add(raw["agent_id"])
        try:
            out.append(AgentScript(
                agent_id=raw["agent_id"],
                waypoints=tuple((Pose.from_seq(w["pose"]), float(w.get("dwell", 0.0)))
                                for w in raw["waypoints"]),
                speed=float(raw["speed"]),
                role=raw.get("role", ""),
                loop=bool(raw.get("loop", False)),
            ))
        except ValueError as exc:
            raise InputError(f"{where}: {exc}") from exc
    return out
