"""Deterministic kinematic execution of action plans among scripted workers.

Robot motion is built as an exact timeline first (travel times are path
length over speed, arm motions take their pose transition durations), then
sampled at fixed ticks together with the worker scripts.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ..fleet import RobotDescriptor, pose_lookup
from ..geometry import Point2, Point3, Pose, point_in_convex
from ..kb import SemanticType
from ..model import element_footprint
from ..worldgen import OccupancyGrid, SimWorld
from .agents import AgentScript
from .compile import GRASP, NAVIGATE, RELEASE, ActionPlan, BoundAction
from .orient import (CARRY_ROTATION, HORIZONTAL, carried_extent, carried_reach, clearance_map,
                     orientation_fit)
from .planner import PlanningError, inflate, plan_path
from .trace import Event, Tick, Trace

_ALL_HEIGHTS = (-math.inf, math.inf)


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.1
    abort_on_failure: bool = False
    margin: float = 0.0             # added to the robot half-width when inflating the map
    reorient_duration: float = 8.0  # calibration constant: seconds to turn the carried frame
    horizon: float = 60.0           # run length when there are no plans
    proximity_radius: float = 1.0   # ticks flag workers closer than this to the robot

    def __post_init__(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.reorient_duration < 0 or self.margin < 0 or self.horizon < 0:
            raise ValueError("reorient_duration, margin and horizon must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "dt": self.dt,
            "abort_on_failure": self.abort_on_failure,
            "margin": self.margin,
            "reorient_duration": self.reorient_duration,
            "horizon": self.horizon,
            "proximity_radius": self.proximity_radius,
        }


@dataclass
class _Span:
    """Robot state over [t0, t1); moving spans go from (x0, y0) to (x1, y1)."""

    t0: float
    t1: float
    x0: float
    y0: float
    x1: float
    y1: float
    yaw: float
    arm: str
    attached: str | None
    pick: Point3 | None
    orientation: str | None
    installed: tuple[str, ...]
    cap: float


@dataclass
class _State:
    x: float
    y: float
    yaw: float
    arm: str = "default"
    attached: str | None = None
    pick: Point3 | None = None
    orientation: str | None = None
    installed: tuple[str, ...] = ()


class _PlanFailed(Exception):
    def __init__(self, cause: str, detail: str, **extra: Any):
        super().__init__(detail)
        self.cause = cause
        self.detail = detail
        self.extra = extra


@dataclass
class _Timeline:
    state: _State
    now: float = 0.0
    spans: list[_Span] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)

    def _span(self, duration: float, x1: float, y1: float, cap: float) -> None:
        s = self.state
        self.spans.append(_Span(self.now, self.now + duration, s.x, s.y, x1, y1, s.yaw, s.arm,
                                s.attached, s.pick, s.orientation, s.installed, cap))
        self.now += duration

    def stay(self, duration: float) -> None:
        if duration > 0:
            self._span(duration, self.state.x, self.state.y, 0.0)

    def move(self, x1: float, y1: float, speed: float) -> float:
        s = self.state
        dist = math.hypot(x1 - s.x, y1 - s.y)
        if dist == 0.0:
            return 0.0
        s.yaw = math.atan2(y1 - s.y, x1 - s.x)
        duration = dist / speed
        self._span(duration, x1, y1, speed)
        s.x, s.y = x1, y1
        return duration

    def event(self, kind: str, **payload: Any) -> None:
        self.events.append(Event(self.now, len(self.events), kind, payload))


class _Runner:
    def __init__(self, world: SimWorld, robot: RobotDescriptor, params: SimParams):
        self.world = world
        self.robot = robot
        self.params = params
        site = world.project.site_params
        self.base_speed = min(robot.max_speed, site.nav_speed_max)
        self.zone_caps = []
        for zid, cap in sorted(site.zone_speed_caps.items()):
            hull = element_footprint(world.project.element(zid), _ALL_HEIGHTS)
            if len(hull) >= 3:
                self.zone_caps.append((hull, cap))
        self.prohibited = []
        for zid in site.prohibited_zones:
            hull = element_footprint(world.project.element(zid), _ALL_HEIGHTS)
            if len(hull) >= 3:
                self.prohibited.append(hull)
        self.working = world.grid
        self._planning: tuple[OccupancyGrid, np.ndarray, np.ndarray] | None = None

    # -- maps ------------------------------------------------------------------

    def planning_maps(self) -> tuple[OccupancyGrid, np.ndarray, np.ndarray]:
        """(grid with prohibited zones, inflated mask, clearance map), rebuilt after installs."""
        if self._planning is None:
            grid = self.working.with_footprints(self.prohibited)
            radius = self.robot.inflation_radius + self.params.margin
            self._planning = (grid, inflate(grid, radius), clearance_map(grid))
        return self._planning

    def install_into_map(self, element_id: str) -> None:
        el = self.world.project.element(element_id)
        self.working = self.working.with_footprints([element_footprint(el, self.world.z_band)])
        self._planning = None

    def speed_between(self, a: Point2, b: Point2) -> float:
        v = self.base_speed
        for hull, cap in self.zone_caps:
            if point_in_convex(hull, a) or point_in_convex(hull, b):
                v = min(v, cap)
        return v

    # -- actions -----------------------------------------------------------------

    def reorient(self, tl: _Timeline, to: str, plan: int, action: str, why: str) -> float:
        frm = tl.state.orientation
        tl.stay(self.params.reorient_duration)
        tl.state.orientation = to
        tl.event("reorient", plan=plan, action=action, element=tl.state.attached,
                 **{"from": frm, "to": to, "at": [tl.state.x, tl.state.y], "reason": why})
        return self.params.reorient_duration

    def navigate(self, tl: _Timeline, step: BoundAction, plan: int) -> tuple[float, float]:
        inputs = step.bound_inputs
        goal: Pose = inputs["destination"] if "destination" in inputs else \
            step.input_of(SemanticType.WORLD_POSE, skip=("initial_pose",))
        grid, blocked, dist = self.planning_maps()
        start = Pose(tl.state.x, tl.state.y, yaw=tl.state.yaw)
        try:
            path = plan_path(grid, start, goal, self.robot.inflation_radius + self.params.margin,
                             blocked=blocked)
        except PlanningError as exc:
            raise _PlanFailed(exc.cause, str(exc)) from None
        poly = path.polyline()
        n_seg = len(poly) - 1
        orients: list[str | None] = [None] * n_seg
        if tl.state.attached is not None:
            el = self.world.project.element(tl.state.attached)
            extent = carried_extent(el, tl.state.pick)  # type: ignore[arg-type]
            try:
                fits = orientation_fit(grid, path, self.robot, extent, tl.state.arm, dist,
                                       carried_reach(el, tl.state.pick))  # type: ignore[arg-type]
            except PlanningError as exc:
                extra = {"segment": getattr(exc, "segment", None)}
                raise _PlanFailed(exc.cause, str(exc), **extra) from None
            # the connectors from the exact start and to the exact goal share the end segments' fit
            ends = [f.orientation for f in fits]
            orients = [ends[0], *ends, ends[-1]] if len(path.cells) > 1 else ends * 2
        travel = reo = 0.0
        for k in range(n_seg):
            a, b = poly[k], poly[k + 1]
            want = orients[k]
            if want is not None and want != tl.state.orientation:
                reo += self.reorient(tl, want, plan, step.action_name, "corridor")
            travel += tl.move(b[0], b[1], self.speed_between(a, b))
        tl.state.yaw = goal.yaw
        if tl.state.attached is not None and tl.state.orientation != HORIZONTAL:
            reo += self.reorient(tl, HORIZONTAL, plan, step.action_name, "arrival")
        return travel, reo

    def run_step(self, tl: _Timeline, step: BoundAction, plan: int, element_id: str) -> dict[str, float]:
        arm = 0.0
        for name in step.pose_sequence:
            if name == tl.state.arm:
                continue
            d = pose_lookup(self.robot, name).transition_duration
            tl.stay(d)
            tl.state.arm = name
            arm += d
        travel = reo = 0.0
        if step.role == NAVIGATE:
            travel, reo = self.navigate(tl, step, plan)
        elif step.role == GRASP:
            pick = step.input_of(SemanticType.LOCAL_POINT)
            tl.state.attached = element_id
            tl.state.pick = tuple(float(v) for v in pick)  # type: ignore[assignment]
            tl.state.orientation = HORIZONTAL
            tl.event("attach", plan=plan, action=step.action_name, element=element_id,
                     pick_point=list(tl.state.pick))  # type: ignore[arg-type]
        elif step.role == RELEASE:
            target: Pose = step.input_of(SemanticType.TARGET_ELEMENT_POSE)
            if tl.state.attached != element_id:
                raise _PlanFailed("not_holding", f"{step.action_name}: element {element_id} is not held")
            tl.state.attached = tl.state.pick = tl.state.orientation = None
            tl.event("detach", plan=plan, action=step.action_name, element=element_id, installed=True)
            tl.state.installed = tl.state.installed + (element_id,)
            tl.event("install", plan=plan, action=step.action_name, element=element_id,
                     pose=target.as_list())
            self.install_into_map(element_id)
        return {"travel": travel, "arm": arm, "reorient": reo}

    def run_plan(self, tl: _Timeline, plan: ActionPlan, index: int) -> bool:
        for step in plan.steps:
            t0 = tl.now
            tl.event("action_start", plan=index, action=step.action_name, skill=step.skill_id,
                     element=plan.element_id)
            try:
                breakdown = self.run_step(tl, step, index, plan.element_id)
            except _PlanFailed as exc:
                tl.event("failure", plan=index, action=step.action_name, skill=step.skill_id,
                         element=plan.element_id, cause=exc.cause, detail=exc.detail, **exc.extra)
                if tl.state.attached is not None:
                    dropped = tl.state.attached
                    tl.state.attached = tl.state.pick = tl.state.orientation = None
                    tl.event("detach", plan=index, action=step.action_name, element=dropped,
                             installed=False)
                return False
            tl.event("action_end", plan=index, action=step.action_name, skill=step.skill_id,
                     element=plan.element_id, duration=tl.now - t0, breakdown=breakdown)
        return True


def _initial_pose(world: SimWorld) -> Pose:
    p = world.robot_initial_pose
    return Pose(p.x, p.y, yaw=p.yaw) if p is not None else Pose()


def _header(world: SimWorld, plans, agents, params, robot, duration) -> dict[str, Any]:
    carry = {}
    if robot is not None:
        carry = {name: p.carried_object_transform.as_list()
                 for name, p in robot.pose_library.items() if p.carried_object_transform is not None}
    return {
        "robot_id": robot.id if robot is not None else "robot",
        "dt": params.dt,
        "duration": duration,
        "params": params.to_dict(),
        "agents": [{"agent_id": a.agent_id, "role": a.role, "speed": a.speed} for a in agents],
        "plans": [{"index": i, "task_id": p.task_id, "element_id": p.element_id,
                   "actions": [s.action_name for s in p.steps]} for i, p in enumerate(plans)],
        "targets": {eid: pose.as_list() for eid, pose in sorted(world.install_targets.items())},
        "carry_transforms": carry,
        "carry_rotations": {k: v.as_list() for k, v in CARRY_ROTATION.items()},
        "robot_max_speed": robot.max_speed if robot is not None else 0.0,
        "site_speed_max": world.project.site_params.nav_speed_max,
    }


def object_pose(robot_pose: Pose, carry: Pose, orientation: str, pick: Sequence[float]) -> Pose:
    """Carried element pose: robot base, arm carry transform, carry orientation, minus grip offset."""
    grip = Pose(-pick[0], -pick[1], -pick[2])
    return robot_pose.compose(carry).compose(CARRY_ROTATION[orientation]).compose(grip)


def _sample(tl: _Timeline, agents: Sequence[AgentScript], robot: RobotDescriptor | None,
            params: SimParams, duration: float) -> list[Tick]:
    dt = params.dt
    n = int(math.ceil(duration / dt - 1e-9))
    spans = [s for s in tl.spans if s.t1 > s.t0]
    s = tl.state
    spans.append(_Span(tl.now, math.inf, s.x, s.y, s.x, s.y, s.yaw, s.arm, s.attached, s.pick,
                       s.orientation, s.installed, 0.0))
    starts = [sp.t0 for sp in spans]
    carry = {}
    if robot is not None:
        carry = {k: p.carried_object_transform for k, p in robot.pose_library.items()}
    ticks: list[Tick] = []
    for k in range(n + 1):
        t = k * dt
        i = max(0, bisect.bisect_right(starts, t) - 1)
        sp = spans[i]
        if sp.t1 == math.inf or sp.t1 == sp.t0:
            x, y = sp.x1, sp.y1
        else:
            f = (t - sp.t0) / (sp.t1 - sp.t0)
            x, y = sp.x0 + f * (sp.x1 - sp.x0), sp.y0 + f * (sp.y1 - sp.y0)
        # highest speed cap in force during (t - dt, t]
        cap = sp.cap
        j = i - 1
        while j >= 0 and spans[j].t1 > t - dt:
            cap = max(cap, spans[j].cap)
            j -= 1
        rp = Pose(x, y, 0.0, yaw=sp.yaw)
        obj = None
        if sp.attached is not None:
            obj = object_pose(rp, carry[sp.arm], sp.orientation, sp.pick)  # type: ignore[arg-type]
        apos = {a.agent_id: a.pose_at(t) for a in agents}
        near = tuple(a for a, p in apos.items()
                     if math.hypot(p.x - x, p.y - y) <= params.proximity_radius)
        ticks.append(Tick(t, rp, sp.arm, sp.installed, apos, cap, sp.attached, sp.orientation,
                          sp.pick, obj, near))
    return ticks


def run(world: SimWorld, plans: Sequence[ActionPlan], agents: Sequence[AgentScript] = (),
        params: SimParams = SimParams(), robot: RobotDescriptor | None = None) -> Trace:
    """Execute ``plans`` in order; a pure function of its inputs."""
    if plans and robot is None:
        raise ValueError("a robot descriptor is required to execute plans")
    init = _initial_pose(world)
    tl = _Timeline(_State(init.x, init.y, init.yaw))
    if plans:
        runner = _Runner(world, robot, params)  # type: ignore[arg-type]
        for i, plan in enumerate(plans):
            if not runner.run_plan(tl, plan, i) and params.abort_on_failure:
                break
        duration = tl.now
    else:
        duration = params.horizon
    ticks = _sample(tl, agents, robot, params, duration)
    return Trace(_header(world, plans, agents, params, robot, duration), ticks, tl.events)
