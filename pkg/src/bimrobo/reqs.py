"""Additional modeling requirements derived from the KB, and jobsite parameter checks."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Any, Iterable

from .geometry import Pose
from .kb import BindingExpr, KnowledgeBase, SpecNotFound, Source, lookup_spec, resolve_skills
from .model import Category, Element, Project, ScheduleTask, SiteParams

PICKUP_TAG = "pickup_location"


class RequirementKind(str, enum.Enum):
    WORLD_OBJECT = "world_object"
    ELEMENT_LOCAL_POINT = "element_local_point"
    USER_PARAM = "user_param"


class SiteParamsError(ValueError):
    pass


class RequirementError(ValueError):
    pass


@dataclass(frozen=True)
class ModelingRequirement:
    task_id: str
    action_name: str
    skill_id: str
    missing_arg: str
    requirement_kind: RequirementKind
    params: tuple[tuple[str, str], ...]
    description: str
    satisfied: bool = False

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.task_id, self.action_name, self.missing_arg)

    def param(self, name: str) -> str:
        return dict(self.params)[name]

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "action_name": self.action_name,
            "skill_id": self.skill_id,
            "missing_arg": self.missing_arg,
            "requirement_kind": self.requirement_kind.value,
            "params": dict(self.params),
            "description": self.description,
            "satisfied": self.satisfied,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelingRequirement":
        return cls(
            d["task_id"], d["action_name"], d["skill_id"], d["missing_arg"],
            RequirementKind(d["requirement_kind"]), tuple(sorted(d["params"].items())),
            d["description"], bool(d.get("satisfied", False)),
        )


@dataclass(frozen=True)
class SatisfactionReport:
    items: tuple[ModelingRequirement, ...] = ()

    @property
    def passed(self) -> bool:
        return all(r.satisfied for r in self.items)

    @property
    def unsatisfied(self) -> tuple[ModelingRequirement, ...]:
        return tuple(r for r in self.items if not r.satisfied)


# -- resolution against a project ---------------------------------------------------

def find_world_object(project: Project, category: str, tag: str) -> Element | None:
    for e in project.elements:
        if e.category.value == category and tag in e.tags:
            return e
    return None


def find_access_marker(project: Project, tag: str) -> Element | None:
    """Zone marker tagged ``pickup_location`` that also carries ``tag``."""
    for e in project.elements:
        if e.category is Category.ZONE_MARKER and PICKUP_TAG in e.tags and tag in e.tags:
            return e
    return None


def resolve_world_object_pose(project: Project, category: str, tag: str) -> Pose | None:
    """Robot-facing pose for a world object: the object itself for zone markers,
    otherwise the pickup zone marker modeled next to it."""
    if category == Category.ZONE_MARKER.value:
        obj = find_world_object(project, category, tag)
        return obj.placement if obj else None
    if find_world_object(project, category, tag) is None:
        return None
    marker = find_access_marker(project, tag)
    return marker.placement if marker else None


def binding_resolvable(project: Project, task: ScheduleTask, binding: BindingExpr) -> bool:
    src = binding.source
    if src is Source.WORLD_OBJECT_POSE:
        return resolve_world_object_pose(project, binding.category, binding.tag) is not None  # type: ignore[arg-type]
    if src is Source.ELEMENT_LOCAL_POINT:
        return all(binding.point_name in project.element(eid).local_points for eid in task.element_ids)
    if src is Source.USER_PARAM:
        return binding.param_name in project.site_params.user_params
    # target poses come from the building elements, maps are generated
    return True


def _requirement_for(task: ScheduleTask, action_name: str, skill_id: str, arg: str,
                     binding: BindingExpr) -> ModelingRequirement:
    src = binding.source
    if src is Source.WORLD_OBJECT_POSE:
        kind = RequirementKind.WORLD_OBJECT
        params = (("category", binding.category), ("tag", binding.tag))
        desc = (f"model a {binding.category} object tagged {binding.tag!r} together with a "
                f"{PICKUP_TAG!r} zone marker next to it; '{action_name}' ({skill_id}) needs its "
                f"3D coordinate as '{arg}'")
    elif src is Source.ELEMENT_LOCAL_POINT:
        kind = RequirementKind.ELEMENT_LOCAL_POINT
        params = (("point_name", binding.point_name),)
        desc = (f"specify local point {binding.point_name!r} on every element of task {task.id} "
                f"so '{action_name}' ({skill_id}) can use it as '{arg}'")
    elif src is Source.USER_PARAM:
        kind = RequirementKind.USER_PARAM
        params = (("param_name", binding.param_name),)
        desc = (f"provide jobsite parameter {binding.param_name!r} for '{action_name}' "
                f"({skill_id}) argument '{arg}'")
    else:  # pragma: no cover - these sources always resolve
        raise RequirementError(f"binding {src.value} cannot produce a requirement")
    return ModelingRequirement(task.id, action_name, skill_id, arg, kind,
                               tuple(sorted(params)), desc)  # type: ignore[arg-type]


def derive_requirements(project: Project, kb: KnowledgeBase) -> list[ModelingRequirement]:
    """One requirement per (robotized task, action, skill argument) that the
    current project cannot resolve."""
    out: list[ModelingRequirement] = []
    for task in project.tasks:
        if not task.robotization:
            continue
        try:
            spec = lookup_spec(kb, task.task_spec_id)  # type: ignore[arg-type]
        except SpecNotFound as exc:
            raise RequirementError(f"task {task.id} ({task.name}): {exc}") from None
        for action, skill in resolve_skills(kb, spec):
            for arg in skill.arg_names:
                binding = action.input_bindings[arg]
                if not binding_resolvable(project, task, binding):
                    out.append(_requirement_for(task, action.action_name, skill.skill_id, arg, binding))
    return out


def _requirement_binding(req: ModelingRequirement) -> BindingExpr:
    p = dict(req.params)
    if req.requirement_kind is RequirementKind.WORLD_OBJECT:
        return BindingExpr(Source.WORLD_OBJECT_POSE, category=p["category"], tag=p["tag"])
    if req.requirement_kind is RequirementKind.ELEMENT_LOCAL_POINT:
        return BindingExpr(Source.ELEMENT_LOCAL_POINT, point_name=p["point_name"])
    return BindingExpr(Source.USER_PARAM, param_name=p["param_name"])


def check_satisfaction(project: Project, reqs: Iterable[ModelingRequirement]) -> SatisfactionReport:
    items = []
    for req in reqs:
        task = project.task_index.get(req.task_id)
        ok = task is not None and binding_resolvable(project, task, _requirement_binding(req))
        items.append(replace(req, satisfied=ok))
    return SatisfactionReport(tuple(items))


def validate_site_params(params: SiteParams, project: Project) -> SiteParams:
    """Check limits and zone references; returns params with defaults filled in."""
    for name in ("allowable_robot_footprint_radius_max", "allowable_robot_weight_max",
                 "nav_speed_min", "nav_speed_max"):
        v = getattr(params, name)
        if not (math.isfinite(v) and v > 0):
            raise SiteParamsError(f"{name} must be positive, got {v}")
    if params.nav_speed_min > params.nav_speed_max:
        raise SiteParamsError(
            f"inverted navigation speed bounds: nav_speed_min={params.nav_speed_min} > "
            f"nav_speed_max={params.nav_speed_max}")
    zone_ids = list(params.prohibited_zones) + list(params.zone_speed_caps)
    for zid in zone_ids:
        el = project.element_index.get(zid)
        if el is None:
            raise SiteParamsError(f"dangling zone id {zid!r}")
        if el.category is not Category.ZONE_MARKER:
            raise SiteParamsError(f"zone {zid!r} is a {el.category.value}, not a zone_marker")
    for zid, cap in params.zone_speed_caps.items():
        if not (math.isfinite(cap) and cap > 0):
            raise SiteParamsError(f"speed cap of zone {zid!r} must be positive, got {cap}")
    return SiteParams(
        allowable_robot_footprint_radius_max=float(params.allowable_robot_footprint_radius_max),
        allowable_robot_weight_max=float(params.allowable_robot_weight_max),
        nav_speed_min=float(params.nav_speed_min),
        nav_speed_max=float(params.nav_speed_max),
        prohibited_zones=tuple(params.prohibited_zones),
        zone_speed_caps=dict(params.zone_speed_caps),
        user_params=dict(params.user_params),
    )


def format_requirements_table(items: Iterable[ModelingRequirement]) -> str:
    rows = [("task", "action", "skill", "argument", "kind", "status")]
    for r in items:
        rows.append((r.task_id, r.action_name, r.skill_id, r.missing_arg,
                     f"{r.requirement_kind.value}({', '.join(v for _, v in r.params)})",
                     "satisfied" if r.satisfied else "MISSING"))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
