"""Separation distances, action durations and the run report.

Distances are 2D centre-to-centre between agent poses, sampled at trace ticks
without interpolation. With a relative speed of at most ``v`` the true minimum
can undercut the sampled one by at most ``v * dt / 2``; the summary reports the
looser ``v * dt`` bound.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .sim.trace import Trace
from .worldgen import FREE, OCCUPIED, OccupancyGrid

PROXIMITY_ALERT = 1.0


class MalformedTrace(ValueError):
    pass


@dataclass(frozen=True)
class SeparationSeries:
    pair: tuple[str, str]
    times: np.ndarray
    distances: np.ndarray
    min_distance: float
    min_time: float

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.distances.tolist()))


def separation(trace: Trace, a: str, b: str) -> SeparationSeries:
    """Distance between two agents (the robot id names the robot) at every tick."""
    pa = trace.positions(a)
    pb = trace.positions(b)
    t = trace.times()
    d = np.hypot(pa[:, 0] - pb[:, 0], pa[:, 1] - pb[:, 1])
    if len(d) == 0:
        return SeparationSeries((a, b), t, d, math.inf, math.nan)
    i = int(np.argmin(d))
    return SeparationSeries((a, b), t, d, float(d[i]), float(t[i]))


@dataclass(frozen=True)
class ActionDuration:
    action_name: str
    duration: float
    breakdown: Mapping[str, float] = field(default_factory=dict)
    failed: bool = False


@dataclass(frozen=True)
class PlanDurations:
    plan: int
    element_id: str
    actions: tuple[ActionDuration, ...]
    failed: bool = False

    @property
    def total(self) -> float:
        return sum(a.duration for a in self.actions)


@dataclass(frozen=True)
class DurationReport:
    plans: tuple[PlanDurations, ...] = ()

    @property
    def total(self) -> float:
        return sum(p.total for p in self.plans)

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_total_s": self.total,
            "plans": [
                {
                    "plan": p.plan,
                    "element_id": p.element_id,
                    "total_s": p.total,
                    "failed": p.failed,
                    "actions": [{"action": a.action_name, "duration_s": a.duration,
                                 "breakdown_s": dict(a.breakdown), "failed": a.failed}
                                for a in p.actions],
                }
                for p in self.plans
            ],
        }


def durations(trace: Trace) -> DurationReport:
    """Per-action durations from matched action_start / action_end (or failure) events."""
    open_: dict[int, tuple[str, float]] = {}
    per_plan: dict[int, list[ActionDuration]] = {}
    failed: set[int] = set()
    elements: dict[int, str] = {p["index"]: p["element_id"] for p in trace.header.get("plans", [])}
    for e in sorted(trace.events, key=lambda e: (e.t, e.seq)):
        if e.kind not in ("action_start", "action_end", "failure"):
            continue
        plan = int(e.payload["plan"])
        action = e.payload["action"]
        if e.kind == "action_start":
            if plan in open_:
                raise MalformedTrace(f"plan {plan}: {action} starts before {open_[plan][0]} ended")
            if plan in failed:
                raise MalformedTrace(f"plan {plan}: {action} starts after a terminal failure")
            open_[plan] = (action, e.t)
            elements.setdefault(plan, e.payload.get("element", ""))
            continue
        if plan not in open_ or open_[plan][0] != action:
            raise MalformedTrace(f"plan {plan}: {e.kind} for {action} without a matching action_start")
        _, t0 = open_.pop(plan)
        dur = e.t - t0
        if dur < 0:
            raise MalformedTrace(f"plan {plan}: {action} ends before it starts")
        if e.kind == "failure":
            failed.add(plan)
        per_plan.setdefault(plan, []).append(
            ActionDuration(action, dur, dict(e.payload.get("breakdown", {})), e.kind == "failure"))
    if open_:
        plan, (action, _) = next(iter(sorted(open_.items())))
        raise MalformedTrace(f"plan {plan}: {action} never ends")
    return DurationReport(tuple(
        PlanDurations(p, elements.get(p, ""), tuple(acts), p in failed)
        for p, acts in sorted(per_plan.items())))


def reorient_count(trace: Trace, plan: int | None = None) -> int:
    return sum(1 for e in trace.events_of("reorient") if plan is None or e.payload.get("plan") == plan)


# -- report -------------------------------------------------------------------------

def _robot_speed(trace: Trace) -> float:
    h = trace.header
    return min(float(h.get("robot_max_speed", 0.0)), float(h.get("site_speed_max", math.inf)))


def summary(trace: Trace, proximity_alert: float = PROXIMITY_ALERT) -> dict[str, Any]:
    dt = float(trace.header.get("dt", 0.0))
    robot = trace.robot_id
    roles = trace.agent_roles()
    speeds = {a["agent_id"]: float(a.get("speed", 0.0)) for a in trace.header.get("agents", [])}
    pairs = []
    for agent in trace.agent_ids:
        s = separation(trace, robot, agent)
        pairs.append({
            "pair": [robot, agent],
            "role": roles.get(agent, ""),
            "min_distance_m": s.min_distance,
            "min_time_s": s.min_time,
            "sampling_error_bound_m": (_robot_speed(trace) + speeds.get(agent, 0.0)) * dt,
            "proximity_alert": bool(s.min_distance < proximity_alert),
        })
    dur = durations(trace)
    failures = [dict(e.payload, t=e.t) for e in trace.events_of("failure")]
    doc: dict[str, Any] = {
        "robot_id": robot,
        "dt_s": dt,
        "run_duration_s": float(trace.header.get("duration", 0.0)),
        "distance_definition": "2D centre-to-centre distance between poses, sampled at ticks",
        "proximity_threshold_m": proximity_alert,
        "plans": len(trace.header.get("plans", [])),
        "installed": [e.payload["element"] for e in trace.events_of("install")],
        "failures": failures,
        "reorient_events": reorient_count(trace),
        "separation": pairs,
        "durations": dur.to_dict(),
    }
    if pairs:
        closest = min(pairs, key=lambda p: p["min_distance_m"])
        doc["min_separation_m"] = closest["min_distance_m"]
        doc["min_separation_pair"] = closest["pair"]
        doc["proximity_alert"] = closest["proximity_alert"]
    else:
        doc["notice"] = "no worker agents in the trace; separation section is empty"
    return doc


def _figure():
    from matplotlib.figure import Figure

    return Figure(figsize=(8, 6), dpi=100)


def _save_svg(fig, path: str) -> None:
    import matplotlib

    with matplotlib.rc_context({"svg.hashsalt": "bimrobo-report", "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None})


def _decimate(n: int, limit: int = 4000) -> slice:
    return slice(None, None, max(1, math.ceil(n / limit)))


def _plot_trajectories(trace: Trace, grid: OccupancyGrid | None, path: str) -> None:
    fig = _figure()
    ax = fig.add_subplot(1, 1, 1)
    if grid is not None:
        img = np.full(grid.cells.shape, 0.8)
        img[grid.cells == FREE] = 1.0
        img[grid.cells == OCCUPIED] = 0.0
        x0, y0 = grid.origin.x, grid.origin.y
        ax.imshow(img, cmap="gray", vmin=0.0, vmax=1.0, origin="lower", interpolation="nearest",
                  extent=(x0, x0 + grid.width * grid.resolution, y0, y0 + grid.height * grid.resolution))
    ids = [trace.robot_id] + trace.agent_ids
    roles = trace.agent_roles()
    for aid in ids:
        p = trace.positions(aid)
        sl = _decimate(len(p))
        label = aid if aid == trace.robot_id else f"{aid} ({roles.get(aid, '')})"
        ax.plot(p[sl, 0], p[sl, 1], linewidth=1.2 if aid == trace.robot_id else 0.8, label=label)
    for eid, pose in sorted(trace.header.get("targets", {}).items()):
        ax.plot([pose[0]], [pose[1]], marker="s", markersize=3, color="saddlebrown")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    ax.set_title("Robot and worker trajectories")
    ax.legend(loc="upper right", fontsize=7)
    _save_svg(fig, path)


def _plot_separation(s: SeparationSeries, threshold: float, path: str) -> None:
    fig = _figure()
    ax = fig.add_subplot(1, 1, 1)
    sl = _decimate(len(s.times))
    ax.plot(s.times[sl], s.distances[sl], linewidth=0.8)
    ax.axhline(threshold, color="red", linestyle="--", linewidth=0.8)
    ax.plot([s.min_time], [s.min_distance], marker="o", color="red")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("distance [m]")
    ax.set_title(f"Separation {s.pair[0]} - {s.pair[1]} (min {s.min_distance:.2f} m)")
    _save_svg(fig, path)


def emit_report(trace: Trace, out_dir: str | os.PathLike, grid: OccupancyGrid | None = None,
                proximity_alert: float = PROXIMITY_ALERT) -> list[str]:
    """Write trajectory.svg, one separation_<agent>.svg per worker and summary.json.

    Returns the written file names. Output bytes depend only on the inputs.
    """
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    files = ["trajectory.svg"]
    _plot_trajectories(trace, grid, os.path.join(out_dir, "trajectory.svg"))
    for agent in trace.agent_ids:
        name = f"separation_{agent}.svg"
        _plot_separation(separation(trace, trace.robot_id, agent), proximity_alert,
                         os.path.join(out_dir, name))
        files.append(name)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary(trace, proximity_alert), fh, indent=2, sort_keys=True)
        fh.write("\n")
    files.append("summary.json")
    return files
