"""Bind a robotized schedule task to concrete action inputs, one plan per element."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

from ..fleet import RobotDescriptor, pose_lookup
from ..geometry import Pose
from ..kb import KnowledgeBase, SemanticType, Source, TaskSpecification
from ..model import ScheduleTask
from ..worldgen import SimWorld, world_object_key

DEFAULT_STANDOFF_EXTRA = 0.2

# how the engine executes a step, inferred from the skill's argument types
NAVIGATE = "navigate"
GRASP = "grasp"
RELEASE = "release"
ARM = "arm"


class CompileError(Exception):
    pass


@dataclass(frozen=True)
class MapRef:
    """Stands for the working occupancy grid at the time the action starts."""

    name: str = "working"


@dataclass(frozen=True)
class BoundAction:
    action_name: str
    skill_id: str
    bound_inputs: Mapping[str, Any]
    pose_sequence: tuple[str, ...]
    target_element_id: str | None = None
    role: str = ARM
    semantics: Mapping[str, SemanticType] = field(default_factory=dict)

    def input_of(self, semantic: SemanticType, skip: tuple[str, ...] = ()) -> Any:
        """First bound input of the given type (arguments in ``skip`` ignored)."""
        for name, sem in self.semantics.items():
            if sem is semantic and name not in skip:
                return self.bound_inputs[name]
        raise KeyError(f"{self.action_name}: no {semantic.value} input")


@dataclass(frozen=True)
class ActionPlan:
    task_id: str
    robot_id: str
    element_id: str
    steps: tuple[BoundAction, ...] = field(default=())


def standoff_pose(target: Pose, distance: float) -> Pose:
    """Ground pose ``distance`` in front of the element's local -y face, facing the element."""
    c, s = math.cos(target.yaw), math.sin(target.yaw)
    # local -y rotated into the world
    return Pose(target.x + distance * s, target.y - distance * c, 0.0,
                yaw=target.yaw + math.pi / 2)


def _bind(binding, semantic: SemanticType, world: SimWorld, task: ScheduleTask,
          element_id: str, standoff: float) -> Any:
    src = binding.source
    if src is Source.WORLD_OBJECT_POSE:
        key = world_object_key(binding.category, binding.tag)
        if key not in world.named_poses:
            raise CompileError(f"task {task.id}: world object {key} is not in the simulation world")
        return world.named_poses[key]
    if src is Source.ELEMENT_LOCAL_POINT:
        el = world.project.element(element_id)
        if binding.point_name not in el.local_points:
            raise CompileError(f"element {element_id} has no local point {binding.point_name!r}")
        return tuple(float(v) for v in el.local_points[binding.point_name])
    if src is Source.ELEMENT_TARGET_POSE:
        target = world.install_targets[element_id]
        if semantic is SemanticType.WORLD_POSE:
            return standoff_pose(target, standoff)
        return target
    if src is Source.USER_PARAM:
        params = world.project.site_params.user_params
        if binding.param_name not in params:
            raise CompileError(f"jobsite parameter {binding.param_name!r} is not set")
        value = params[binding.param_name]
        if semantic is SemanticType.WORLD_POSE:
            return Pose.from_seq([float(v) for v in value])
        return value
    if src is Source.GENERATED_MAP:
        return MapRef()
    raise CompileError(f"unsupported binding source {src}")  # pragma: no cover


def _role(types) -> str:
    types = set(types)
    if SemanticType.METRIC_MAP in types:
        return NAVIGATE
    if SemanticType.LOCAL_POINT in types:
        return GRASP
    if SemanticType.TARGET_ELEMENT_POSE in types:
        return RELEASE
    return ARM


def compile_plan(task: ScheduleTask, spec: TaskSpecification, world: SimWorld,
                 robot: RobotDescriptor, kb: KnowledgeBase,
                 standoff_extra: float = DEFAULT_STANDOFF_EXTRA) -> list[ActionPlan]:
    """One plan per element of ``task`` that is still to be installed, in task order."""
    standoff = robot.footprint_radius + standoff_extra
    plans = []
    for eid in task.element_ids:
        if eid not in world.install_targets:
            continue  # already built
        steps = []
        for action in spec.actions:
            skill = kb.skills[action.skill_id]
            inputs = {
                arg.arg_name: _bind(action.input_bindings[arg.arg_name], arg.semantic_type,
                                    world, task, eid, standoff)
                for arg in skill.input_args
            }
            try:
                seq = robot.poses_for(skill.skill_id)
            except KeyError as exc:
                raise CompileError(str(exc)) from None
            semantics = {a.arg_name: a.semantic_type for a in skill.input_args}
            steps.append(BoundAction(action.action_name, skill.skill_id, inputs, seq, eid,
                                     _role(semantics.values()), semantics))
        plans.append(ActionPlan(task.id, robot.id, eid, tuple(steps)))
    return plans


def check_carry_poses(plan: ActionPlan, robot: RobotDescriptor) -> None:
    """Every arm pose entered while an element is held must define a carry transform."""
    holding = False
    for step in plan.steps:
        for name in step.pose_sequence:
            if holding and not pose_lookup(robot, name).carries:
                raise CompileError(f"{step.action_name}: pose {name!r} cannot hold an element")
        if step.role == GRASP:
            holding = True
        elif step.role == RELEASE:
            holding = False
