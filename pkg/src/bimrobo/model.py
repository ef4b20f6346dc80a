"""4D BIM interchange: elements, schedule, site parameters and the project manifest."""

from __future__ import annotations

import datetime as dt
import enum
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np

from ._io import InputError, context, dump_yaml, load_yaml_validated
from .collada import ColladaError, Mesh, box_mesh, parse_collada_mesh
from .geometry import Point2, Point3, Pose, convex_hull

__all__ = [
    "Category",
    "BoxGeometry",
    "MeshGeometry",
    "Element",
    "ScheduleTask",
    "SiteParams",
    "Project",
    "InputError",
    "load_project",
    "dump_project",
    "project_to_dict",
    "element_footprint",
    "element_world_vertices",
]


class Category(str, enum.Enum):
    BUILDING = "building"
    SITE_OBJECT = "site_object"
    STORAGE = "storage"
    ZONE_MARKER = "zone_marker"


@dataclass(frozen=True)
class BoxGeometry:
    """Box centred on the element origin in x/y, base at local z=0."""

    extents: tuple[float, float, float]

    def __post_init__(self) -> None:
        ext = tuple(float(e) for e in self.extents)
        if len(ext) != 3 or any(not (e > 0 and math.isfinite(e)) for e in ext):
            raise ValueError(f"box extents must be three positive numbers, got {self.extents}")
        object.__setattr__(self, "extents", ext)

    def mesh(self) -> Mesh:
        return box_mesh(*self.extents)


@dataclass(frozen=True)
class MeshGeometry:
    path: str
    data: Mesh = field(compare=True, repr=False)

    def mesh(self) -> Mesh:
        return self.data


Geometry = BoxGeometry | MeshGeometry


@dataclass(frozen=True)
class Element:
    id: str
    name: str
    geometry: Geometry
    placement: Pose
    category: Category = Category.BUILDING
    local_points: Mapping[str, Point3] = field(default_factory=dict)
    linked_task_id: str | None = None
    tags: tuple[str, ...] = ()

    def local_extents(self) -> tuple[float, float, float]:
        lo, hi = self.geometry.mesh().bounds()
        return tuple(float(v) for v in hi - lo)  # type: ignore[return-value]


@dataclass(frozen=True)
class ScheduleTask:
    id: str
    name: str
    start_date: dt.date
    finish_date: dt.date
    robotization: bool = False
    task_spec_id: str | None = None
    element_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.start_date > self.finish_date:
            raise ValueError(f"task {self.id}: start_date after finish_date")
        if self.robotization and not self.task_spec_id:
            raise ValueError(f"task {self.id}: robotization requires task_spec_id")


@dataclass(frozen=True)
class SiteParams:
    """Jobsite limits and user-provided inputs.

    Defaults (used when a field is omitted): footprint radius cap 0.6 m,
    weight cap 100 kg, navigation speed 0.2-1.0 m/s, no prohibited zones.
    """

    allowable_robot_footprint_radius_max: float = 0.6
    allowable_robot_weight_max: float = 100.0
    nav_speed_min: float = 0.2
    nav_speed_max: float = 1.0
    prohibited_zones: tuple[str, ...] = ()
    zone_speed_caps: Mapping[str, float] = field(default_factory=dict)
    user_params: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any] | None) -> "SiteParams":
        d = dict(d or {})
        kw: dict[str, Any] = {}
        for name in ("allowable_robot_footprint_radius_max", "allowable_robot_weight_max",
                     "nav_speed_min", "nav_speed_max"):
            if name in d:
                kw[name] = float(d[name])
        if "prohibited_zones" in d:
            kw["prohibited_zones"] = tuple(d["prohibited_zones"])
        if "zone_speed_caps" in d:
            kw["zone_speed_caps"] = {str(k): float(v) for k, v in d["zone_speed_caps"].items()}
        if "user_params" in d:
            kw["user_params"] = dict(d["user_params"])
        return cls(**kw)

    def to_dict(self) -> dict[str, Any]:
        return {
            "allowable_robot_footprint_radius_max": self.allowable_robot_footprint_radius_max,
            "allowable_robot_weight_max": self.allowable_robot_weight_max,
            "nav_speed_min": self.nav_speed_min,
            "nav_speed_max": self.nav_speed_max,
            "prohibited_zones": list(self.prohibited_zones),
            "zone_speed_caps": dict(self.zone_speed_caps),
            "user_params": dict(self.user_params),
        }


@dataclass(frozen=True)
class Project:
    elements: tuple[Element, ...] = ()
    tasks: tuple[ScheduleTask, ...] = ()
    site_params: SiteParams = field(default_factory=SiteParams)
    simulation_start_date: dt.date = dt.date(1970, 1, 1)
    name: str = ""

    @cached_property
    def element_index(self) -> dict[str, Element]:
        return {e.id: e for e in self.elements}

    @cached_property
    def task_index(self) -> dict[str, ScheduleTask]:
        return {t.id: t for t in self.tasks}

    def element(self, element_id: str) -> Element:
        return self.element_index[element_id]

    def task(self, task_id: str) -> ScheduleTask:
        return self.task_index[task_id]


def _parse_date(value: str, where: str) -> dt.date:
    try:
        return dt.date.fromisoformat(value)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}: invalid date {value!r}") from exc


def load_project(manifest_path: str | os.PathLike) -> Project:
    """Load and cross-check a project manifest (YAML, see ``schemas/project.schema.json``)."""
    manifest_path = os.fspath(manifest_path)
    data, lines = load_yaml_validated(manifest_path, "project")
    base = os.path.dirname(os.path.abspath(manifest_path))

    elements: list[Element] = []
    seen: set[str] = set()
    for i, raw in enumerate(data.get("elements", [])):
        where = context(manifest_path, lines, ("elements", i))
        if raw["id"] in seen:
            raise InputError(f"{where}: duplicate element id {raw['id']!r}")
        seen.add(raw["id"])
        geo = raw["geometry"]
        if "box" in geo:
            geometry: Geometry = BoxGeometry(tuple(geo["box"]))
        else:
            mpath = os.path.normpath(os.path.join(base, geo["mesh"]))
            if not os.path.isfile(mpath):
                raise InputError(f"{where}.geometry.mesh: mesh file not found: {mpath}")
            try:
                geometry = MeshGeometry(mpath, parse_collada_mesh(mpath))
            except ColladaError as exc:
                raise InputError(f"{where}.geometry.mesh: {exc}") from exc
        elements.append(
            Element(
                id=raw["id"],
                name=raw.get("name", raw["id"]),
                geometry=geometry,
                placement=Pose.from_seq(raw["placement"]),
                category=Category(raw["category"]),
                local_points={k: tuple(float(c) for c in v) for k, v in raw.get("local_points", {}).items()},
                linked_task_id=raw.get("linked_task_id"),
                tags=tuple(raw.get("tags", ())),
            )
        )

    tasks: list[ScheduleTask] = []
    task_ids: set[str] = set()
    for i, raw in enumerate(data.get("tasks", [])):
        where = context(manifest_path, lines, ("tasks", i))
        if raw["id"] in task_ids:
            raise InputError(f"{where}: duplicate task id {raw['id']!r}")
        task_ids.add(raw["id"])
        start = _parse_date(raw["start_date"], where + ".start_date")
        finish = _parse_date(raw["finish_date"], where + ".finish_date")
        try:
            task = ScheduleTask(
                id=raw["id"],
                name=raw.get("name", raw["id"]),
                start_date=start,
                finish_date=finish,
                robotization=bool(raw.get("robotization", False)),
                task_spec_id=raw.get("task_spec_id"),
                element_ids=tuple(raw.get("element_ids", ())),
            )
        except ValueError as exc:
            raise InputError(f"{where}: {exc}") from exc
        for eid in task.element_ids:
            if eid not in seen:
                raise InputError(f"{where}.element_ids: dangling element reference {eid!r}")
        tasks.append(task)

    by_task = {t.id: t for t in tasks}
    for i, el in enumerate(elements):
        if el.linked_task_id is None:
            continue
        where = context(manifest_path, lines, ("elements", i, "linked_task_id"))
        task = by_task.get(el.linked_task_id)
        if task is None:
            raise InputError(f"{where}: dangling task reference {el.linked_task_id!r}")
        if el.id not in task.element_ids:
            raise InputError(f"{where}: task {task.id!r} does not list element {el.id!r}")
    by_el = {e.id: e for e in elements}
    for i, task in enumerate(tasks):
        for eid in task.element_ids:
            if by_el[eid].linked_task_id != task.id:
                where = context(manifest_path, lines, ("tasks", i, "element_ids"))
                raise InputError(f"{where}: element {eid!r} is not linked back to task {task.id!r}")

    start = _parse_date(data["simulation_start_date"],
                        context(manifest_path, lines, ("simulation_start_date",)))
    try:
        site = SiteParams.from_dict(data.get("site_params"))
    except (TypeError, ValueError) as exc:
        raise InputError(f"{context(manifest_path, lines, ('site_params',))}: {exc}") from exc
    return Project(tuple(elements), tuple(tasks), site, start, data.get("name", ""))


def project_to_dict(project: Project, base_dir: str) -> dict[str, Any]:
    elements = []
    for e in project.elements:
        if isinstance(e.geometry, BoxGeometry):
            geo: dict[str, Any] = {"box": list(e.geometry.extents)}
        else:
            geo = {"mesh": os.path.relpath(e.geometry.path, base_dir)}
        raw: dict[str, Any] = {
            "id": e.id,
            "name": e.name,
            "category": e.category.value,
            "geometry": geo,
            "placement": e.placement.as_list(),
        }
        if e.local_points:
            raw["local_points"] = {k: list(v) for k, v in e.local_points.items()}
        if e.linked_task_id is not None:
            raw["linked_task_id"] = e.linked_task_id
        if e.tags:
            raw["tags"] = list(e.tags)
        elements.append(raw)
    tasks = [
        {
            "id": t.id,
            "name": t.name,
            "start_date": t.start_date.isoformat(),
            "finish_date": t.finish_date.isoformat(),
            "robotization": t.robotization,
            "task_spec_id": t.task_spec_id,
            "element_ids": list(t.element_ids),
        }
        for t in project.tasks
    ]
    return {
        "schema_version": 1,
        "name": project.name,
        "simulation_start_date": project.simulation_start_date.isoformat(),
        "site_params": project.site_params.to_dict(),
        "elements": elements,
        "tasks": tasks,
    }


def dump_project(project: Project, manifest_path: str | os.PathLike) -> None:
    manifest_path = os.fspath(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    dump_yaml(project_to_dict(project, base), manifest_path)


def element_world_vertices(element: Element) -> np.ndarray:
    mesh = element.geometry.mesh()
    p = element.placement
    rot = np.array(p.rotation())
    return mesh.vertices @ rot.T + np.array([p.x, p.y, p.z])


def _clip_polygon_z(poly: list[Sequence[float]], z: float, keep_above: bool) -> list[Sequence[float]]:
    out: list[Sequence[float]] = []
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        ina = a[2] >= z if keep_above else a[2] <= z
        inb = b[2] >= z if keep_above else b[2] <= z
        if ina:
            out.append(a)
        if ina != inb:
            t = (z - a[2]) / (b[2] - a[2])
            out.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), z))
    return out


def element_footprint(element: Element, z_band: Sequence[float]) -> list[Point2]:
    """Convex hull of the XY projection of the element geometry inside ``z_band``.

    Only triangles with positive overlap with the open band contribute, so a
    slab whose top face merely touches ``z_min`` does not cast a footprint.
    """
    z_min, z_max = float(z_band[0]), float(z_band[1])
    if z_min > z_max:
        raise ValueError(f"z_band not ordered: {z_band}")
    verts = element_world_vertices(element)
    tris = verts[element.geometry.mesh().triangles]
    tz_lo = tris[:, :, 2].min(axis=1)
    tz_hi = tris[:, :, 2].max(axis=1)
    mask = (tz_hi > z_min) & (tz_lo < z_max)
    pts: list[Point2] = []
    for tri in tris[mask]:
        poly: list[Sequence[float]] = [tuple(v) for v in tri]
        poly = _clip_polygon_z(poly, z_min, keep_above=True)
        if poly:
            poly = _clip_polygon_z(poly, z_max, keep_above=False)
        pts.extend((float(v[0]), float(v[1])) for v in poly)
    return convex_hull(pts)
