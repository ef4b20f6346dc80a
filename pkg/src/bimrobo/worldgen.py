"""Simulation world from a 4D BIM project: element partition, SDF files and the 2D metric map."""

from __future__ import annotations

import hashlib
import json
import math
import os
import shutil
import warnings
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

from . import _kernels
from .geometry import Point2, Pose
from .kb import KnowledgeBase, Source, lookup_spec
from .model import BoxGeometry, Category, Element, MeshGeometry, Project, element_footprint
from .reqs import resolve_world_object_pose

FREE = 0
OCCUPIED = 100
UNKNOWN = -1

DEFAULT_Z_BAND = (0.1, 1.8)
DEFAULT_RESOLUTION = 0.05
DEFAULT_MARGIN = 1.0
ROBOT_INITIAL_POSE_PARAM = "robot_initial_pose"

# documented constants for the standalone element models; no physics is simulated
ELEMENT_MASS = 10.0
ELEMENT_INERTIA = 1.0

SDF_VERSION = "1.6"
_SITE_CATEGORIES = (Category.SITE_OBJECT, Category.STORAGE, Category.ZONE_MARKER)


class WorldError(ValueError):
    pass


# -- partition ----------------------------------------------------------------------

@dataclass(frozen=True)
class WorldPartition:
    preexisting: tuple[Element, ...] = ()
    scheduled: tuple[Element, ...] = ()
    site_objects: tuple[Element, ...] = ()
    install_targets: Mapping[str, Pose] = field(default_factory=dict)

    def all_ids(self) -> list[str]:
        return [e.id for e in self.preexisting + self.scheduled + self.site_objects]

    @property
    def static_elements(self) -> tuple[Element, ...]:
        return self.preexisting + self.site_objects


def partition_elements(project: Project) -> WorldPartition:
    """Split elements by schedule state at the simulation start date.

    Building elements whose task finished before the start exist already;
    elements of tasks finishing on or after it are scheduled for installation.
    Unlinked building elements are treated as existing.
    """
    start = project.simulation_start_date
    pre, sched, site = [], [], []
    targets: dict[str, Pose] = {}
    for el in project.elements:
        if el.category in _SITE_CATEGORIES:
            site.append(el)
            continue
        task = project.task_index.get(el.linked_task_id) if el.linked_task_id else None
        if task is None or task.finish_date < start:
            pre.append(el)
            continue
        if el.placement is None:
            raise WorldError(f"element {el.id} of task {task.id} has no placement")
        sched.append(el)
        targets[el.id] = el.placement
    return WorldPartition(tuple(pre), tuple(sched), tuple(site), targets)


# -- occupancy grid -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Row-major raster: ``cells[row, col]`` with row along +y, col along +x.

    ``origin`` is the world pose of the lower-left corner of cell (0, 0).
    """

    resolution: float
    origin: Pose
    cells: np.ndarray

    def __post_init__(self) -> None:
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        c = np.array(self.cells, dtype=np.int8, copy=True)
        if c.ndim != 2 or c.size == 0:
            raise ValueError("cells must be a non-empty 2D array")
        bad = ~np.isin(c, (FREE, OCCUPIED, UNKNOWN))
        if bad.any():
            raise ValueError("cells hold values other than free/occupied/unknown")
        c.setflags(write=False)
        object.__setattr__(self, "cells", c)

    @property
    def height(self) -> int:
        return int(self.cells.shape[0])

    @property
    def width(self) -> int:
        return int(self.cells.shape[1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (self.resolution == other.resolution and self.origin == other.origin
                and np.array_equal(self.cells, other.cells))

    __hash__ = None  # type: ignore[assignment]

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """(row, col) containing the point; may lie outside the grid."""
        return (int(math.floor((y - self.origin.y) / self.resolution)),
                int(math.floor((x - self.origin.x) / self.resolution)))

    def cell_center(self, row: int, col: int) -> Point2:
        return (self.origin.x + (col + 0.5) * self.resolution,
                self.origin.y + (row + 0.5) * self.resolution)

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    @property
    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.cells == OCCUPIED))

    def with_footprints(self, polygons: Iterable[Sequence[Point2]]) -> "OccupancyGrid":
        cells = np.array(self.cells, dtype=np.int8, copy=True)
        for poly in polygons:
            rasterize_polygon(cells, poly, self.origin.x, self.origin.y, self.resolution)
        return OccupancyGrid(self.resolution, self.origin, cells)


def rasterize_polygon(cells: np.ndarray, poly: Sequence[Point2], ox: float, oy: float,
                      res: float, value: int = OCCUPIED) -> None:
    """Mark every cell with positive-area overlap with the convex polygon."""
    if len(poly) < 3:
        return  # a segment or point covers no area
    arr = np.ascontiguousarray(poly, dtype=float)
    _kernels.fill_convex(cells, arr, ox, oy, res, value)


def _snap_down(v: float, res: float) -> float:
    return math.floor(v / res + 1e-9) * res


def build_occupancy_grid(world: "SimWorld | WorldPartition",
                         z_band: Sequence[float] = DEFAULT_Z_BAND,
                         resolution: float = DEFAULT_RESOLUTION,
                         margin: float = DEFAULT_MARGIN,
                         extra_points: Iterable[Point2] = ()) -> OccupancyGrid:
    """Rasterize the footprints of existing and site elements inside ``z_band``.

    Scheduled elements are not drawn. The grid covers every footprint and
    ``extra_points`` (named poses, install targets) plus ``margin``.
    """
    if not (resolution > 0 and math.isfinite(resolution)):
        raise ValueError(f"resolution must be positive, got {resolution}")
    if isinstance(world, SimWorld):
        extra_points = list(extra_points) + [p.xy for p in world.named_poses.values()] + \
            [p.xy for p in world.install_targets.values()]
        partition = world.partition
    else:
        partition = world
    footprints = [element_footprint(e, z_band) for e in partition.static_elements]
    footprints = [fp for fp in footprints if fp]
    pts = [p for fp in footprints for p in fp] + [tuple(p) for p in extra_points]
    if not pts:
        warnings.warn("world has no geometry; using a single free cell", stacklevel=2)
        return OccupancyGrid(resolution, Pose(), np.zeros((1, 1), dtype=np.int8))
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    if not all(math.isfinite(v) for v in xs + ys):
        raise WorldError("world bounding box is not finite")
    ox = _snap_down(min(xs) - margin, resolution)
    oy = _snap_down(min(ys) - margin, resolution)
    w = max(1, int(math.ceil((max(xs) + margin - ox) / resolution - 1e-9)))
    h = max(1, int(math.ceil((max(ys) + margin - oy) / resolution - 1e-9)))
    cells = np.zeros((h, w), dtype=np.int8)
    for fp in footprints:
        rasterize_polygon(cells, fp, ox, oy, resolution)
    return OccupancyGrid(resolution, Pose(ox, oy, 0.0), cells)


# -- simulation world ---------------------------------------------------------------

@dataclass(frozen=True)
class SimWorld:
    project: Project
    partition: WorldPartition
    grid: OccupancyGrid
    named_poses: Mapping[str, Pose] = field(default_factory=dict)
    install_targets: Mapping[str, Pose] = field(default_factory=dict)
    agents: tuple = ()
    z_band: tuple[float, float] = DEFAULT_Z_BAND

    @property
    def robot_initial_pose(self) -> Pose | None:
        return self.named_poses.get(ROBOT_INITIAL_POSE_PARAM)


def world_object_key(category: str, tag: str) -> str:
    return f"{category}:{tag}"


def _named_poses(project: Project) -> dict[str, Pose]:
    poses: dict[str, Pose] = {}
    for el in project.elements:
        if el.category not in _SITE_CATEGORIES:
            continue
        for tag in el.tags:
            key = world_object_key(el.category.value, tag)
            pose = resolve_world_object_pose(project, el.category.value, tag)
            if pose is not None and key not in poses:
                poses[key] = pose
    for name, value in project.site_params.user_params.items():
        if isinstance(value, (list, tuple)) and len(value) in (2, 3, 6):
            try:
                poses[name] = Pose.from_seq([float(v) for v in value])
            except (TypeError, ValueError):
                continue
    return poses


def build_world(project: Project, *, z_band: Sequence[float] = DEFAULT_Z_BAND,
                resolution: float = DEFAULT_RESOLUTION, margin: float = DEFAULT_MARGIN,
                agents: Sequence = ()) -> SimWorld:
    partition = partition_elements(project)
    named = _named_poses(project)
    extra = [p.xy for p in named.values()] + [p.xy for p in partition.install_targets.values()]
    for a in agents:
        extra.extend(wp.xy for wp, _ in a.waypoints)
    grid = build_occupancy_grid(partition, z_band, resolution, margin, extra)
    return SimWorld(project, partition, grid, named, dict(partition.install_targets), tuple(agents),
                    (float(z_band[0]), float(z_band[1])))


def unresolved_world_bindings(world: SimWorld, kb: KnowledgeBase) -> list[str]:
    """Binding keys used by active task specs that the world cannot resolve."""
    missing = []
    for task in world.project.tasks:
        if not task.robotization:
            continue
        spec = lookup_spec(kb, task.task_spec_id)  # type: ignore[arg-type]
        for action in spec.actions:
            for b in action.input_bindings.values():
                if b.source is Source.WORLD_OBJECT_POSE:
                    key = world_object_key(b.category, b.tag)  # type: ignore[arg-type]
                elif b.source is Source.USER_PARAM:
                    key = b.param_name  # type: ignore[assignment]
                    if key in world.project.site_params.user_params:
                        continue
                else:
                    continue
                if key not in world.named_poses and key not in missing:
                    missing.append(key)
    return missing


# -- SDF ----------------------------------------------------------------------------

def _fmt(v: float) -> str:
    v = float(v) + 0.0
    return format(v, ".12g")


def _pose_text(p: Pose) -> str:
    return " ".join(_fmt(v) for v in p.as_list())


def _sub(parent: ET.Element, tag: str, text: str | None = None, **attrs: str) -> ET.Element:
    el = ET.SubElement(parent, tag, attrs)
    if text is not None:
        el.text = text
    return el


def _geometry_xml(parent: ET.Element, el: Element, mesh_uris: Mapping[str, str]) -> None:
    geo = el.geometry
    for kind in ("collision", "visual"):
        node = _sub(parent, kind, name=kind)
        g = ET.Element("geometry")
        if isinstance(geo, BoxGeometry):
            sx, sy, sz = geo.extents
            # SDF boxes are centred; ours rest on local z=0
            _sub(node, "pose", f"0 0 {_fmt(sz / 2.0)} 0 0 0")
            _sub(_sub(g, "box"), "size", f"{_fmt(sx)} {_fmt(sy)} {_fmt(sz)}")
        else:
            m = _sub(g, "mesh")
            _sub(m, "uri", mesh_uris[el.id])
        node.append(g)


def _model_xml(el: Element, pose: Pose, static: bool, mesh_uris: Mapping[str, str]) -> ET.Element:
    if len(el.geometry.mesh().triangles) == 0:
        raise WorldError(f"element {el.id} has no triangles")
    model = ET.Element("model", name=el.id)
    _sub(model, "static", "true" if static else "false")
    _sub(model, "pose", _pose_text(pose))
    link = _sub(model, "link", name="link")
    if not static:
        inertial = _sub(link, "inertial")
        _sub(inertial, "mass", _fmt(ELEMENT_MASS))
        inertia = _sub(inertial, "inertia")
        for k in ("ixx", "iyy", "izz"):
            _sub(inertia, k, _fmt(ELEMENT_INERTIA))
        for k in ("ixy", "ixz", "iyz"):
            _sub(inertia, k, "0")
    _geometry_xml(link, el, mesh_uris)
    return model


def _write_xml(root: ET.Element, path: str) -> None:
    ET.indent(root, space="  ")
    data = b'<?xml version="1.0" ?>\n' + ET.tostring(root, encoding="utf-8") + b"\n"
    with open(path, "wb") as fh:
        fh.write(data)


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _copy_meshes(elements: Iterable[Element], out_dir: str) -> dict[str, str]:
    uris: dict[str, str] = {}
    used: dict[str, str] = {}
    for el in elements:
        if not isinstance(el.geometry, MeshGeometry):
            continue
        src = os.path.abspath(el.geometry.path)
        name = os.path.basename(src)
        if used.get(name, src) != src:
            name = f"{el.id}_{name}"
        used[name] = src
        dst_dir = os.path.join(out_dir, "meshes")
        os.makedirs(dst_dir, exist_ok=True)
        dst = os.path.join(dst_dir, name)
        if not os.path.exists(dst) or sha256_file(dst) != sha256_file(src):
            shutil.copyfile(src, dst)
        uris[el.id] = f"meshes/{name}"
    return uris


def emit_sdf(world: SimWorld, out_dir: str | os.PathLike, world_name: str = "construction_site") -> dict[str, str]:
    """Write ``world.sdf`` (static models) and one ``<element_id>.sdf`` per scheduled element.

    Returns relative file path -> sha256 for every written file, meshes included.
    """
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    part = world.partition
    uris = _copy_meshes(part.static_elements + part.scheduled, out_dir)

    root = ET.Element("sdf", version=SDF_VERSION)
    w = _sub(root, "world", name=world_name)
    for el in part.static_elements:
        w.append(_model_xml(el, el.placement, True, uris))
    files = ["world.sdf"]
    _write_xml(root, os.path.join(out_dir, "world.sdf"))
    for el in part.scheduled:
        root = ET.Element("sdf", version=SDF_VERSION)
        root.append(_model_xml(el, part.install_targets[el.id], False, uris))
        name = f"{el.id}.sdf"
        _write_xml(root, os.path.join(out_dir, name))
        files.append(name)
    files.extend(sorted(set(uris.values())))
    return {f: sha256_file(os.path.join(out_dir, f)) for f in files}


class SDFValidationError(ValueError):
    pass


def _floats(text: str | None, n: int, where: str) -> list[float]:
    try:
        vals = [float(t) for t in (text or "").split()]
    except ValueError:
        raise SDFValidationError(f"{where}: non-numeric value {text!r}") from None
    if len(vals) != n or not all(math.isfinite(v) for v in vals):
        raise SDFValidationError(f"{where}: expected {n} finite numbers, got {text!r}")
    return vals


def _check_model(model: ET.Element, where: str) -> None:
    name = model.get("name")
    if not name:
        raise SDFValidationError(f"{where}: model without name")
    where = f"{where}/model[{name}]"
    static = model.find("static")
    if static is not None and (static.text or "").strip() not in ("true", "false", "0", "1"):
        raise SDFValidationError(f"{where}: static must be a boolean")
    pose = model.find("pose")
    if pose is not None:
        _floats(pose.text, 6, f"{where}/pose")
    links = model.findall("link")
    if not links:
        raise SDFValidationError(f"{where}: model has no link")
    seen = set()
    for link in links:
        lname = link.get("name")
        if not lname or lname in seen:
            raise SDFValidationError(f"{where}: link names must be present and unique")
        seen.add(lname)
        inertial = link.find("inertial")
        if inertial is not None:
            mass = _floats(inertial.findtext("mass"), 1, f"{where}/inertial/mass")[0]
            if mass <= 0:
                raise SDFValidationError(f"{where}: mass must be positive")
        for kind in ("collision", "visual"):
            for node in link.findall(kind):
                if not node.get("name"):
                    raise SDFValidationError(f"{where}: {kind} without name")
                geo = node.find("geometry")
                if geo is None or len(geo) != 1:
                    raise SDFValidationError(f"{where}/{kind}: geometry needs exactly one shape")
                shape = geo[0]
                if shape.tag == "box":
                    size = _floats(shape.findtext("size"), 3, f"{where}/{kind}/box/size")
                    if min(size) <= 0:
                        raise SDFValidationError(f"{where}/{kind}: box size must be positive")
                elif shape.tag == "mesh":
                    if not (shape.findtext("uri") or "").strip():
                        raise SDFValidationError(f"{where}/{kind}: mesh without uri")
                else:
                    raise SDFValidationError(f"{where}/{kind}: unsupported shape {shape.tag!r}")
                p = node.find("pose")
                if p is not None:
                    _floats(p.text, 6, f"{where}/{kind}/pose")


def validate_sdf(path: str | os.PathLike) -> str:
    """Structural check of an emitted SDF file; returns ``"world"`` or ``"model"``."""
    path = os.fspath(path)
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise SDFValidationError(f"{path}: malformed XML: {exc}") from None
    if root.tag != "sdf" or root.get("version") != SDF_VERSION:
        raise SDFValidationError(f"{path}: root must be <sdf version=\"{SDF_VERSION}\">")
    if len(root) != 1 or root[0].tag not in ("world", "model"):
        raise SDFValidationError(f"{path}: expected exactly one <world> or <model>")
    top = root[0]
    if top.tag == "model":
        _check_model(top, path)
        return "model"
    if not top.get("name"):
        raise SDFValidationError(f"{path}: world without name")
    names = set()
    for model in top.findall("model"):
        _check_model(model, path)
        if model.get("name") in names:
            raise SDFValidationError(f"{path}: duplicate model name {model.get('name')!r}")
        names.add(model.get("name"))
    return "world"


# -- PGM map ------------------------------------------------------------------------

PGM_FREE = 254
PGM_OCCUPIED = 0
PGM_UNKNOWN = 205
OCCUPIED_THRESH = 0.65
FREE_THRESH = 0.196


def write_map_pgm(grid: OccupancyGrid, out_path: str | os.PathLike) -> tuple[str, str]:
    """Write ``<out_path>`` (binary P5) and a ``.yaml`` sidecar in the map_server layout.

    The top raster row is the highest-y grid row.
    """
    out_path = os.fspath(out_path)
    raster = np.full(grid.cells.shape, PGM_UNKNOWN, dtype=np.uint8)
    raster[grid.cells == FREE] = PGM_FREE
    raster[grid.cells == OCCUPIED] = PGM_OCCUPIED
    raster = np.ascontiguousarray(raster[::-1])
    with open(out_path, "wb") as fh:
        fh.write(f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())
    meta = {
        "image": os.path.basename(out_path),
        "mode": "trinary",
        "resolution": float(grid.resolution),
        "origin": [float(grid.origin.x), float(grid.origin.y), float(grid.origin.yaw)],
        "negate": 0,
        "occupied_thresh": OCCUPIED_THRESH,
        "free_thresh": FREE_THRESH,
    }
    meta_path = os.path.splitext(out_path)[0] + ".yaml"
    with open(meta_path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(meta, fh, sort_keys=False, default_flow_style=None)
    return out_path, meta_path


def _pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        if j == i:
            raise ValueError("truncated PGM header")
        tokens.append(data[i:j])
        i = j
    return tokens, i + 1  # exactly one whitespace byte before the raster


def read_map_pgm(meta_path: str | os.PathLike) -> OccupancyGrid:
    """Inverse of :func:`write_map_pgm`; accepts the ``.yaml`` sidecar or the ``.pgm`` path."""
    meta_path = os.fspath(meta_path)
    if meta_path.endswith(".pgm"):
        meta_path = os.path.splitext(meta_path)[0] + ".yaml"
    with open(meta_path, encoding="utf-8") as fh:
        meta = yaml.safe_load(fh)
    img = os.path.join(os.path.dirname(meta_path), meta["image"])
    with open(img, "rb") as fh:
        data = fh.read()
    (magic, w, h, maxval), off = _pgm_tokens(data, 4)
    if magic != b"P5" or int(maxval) != 255:
        raise ValueError(f"{img}: only 8-bit binary PGM (P5) is supported")
    w, h = int(w), int(h)
    raster = np.frombuffer(data[off:off + w * h], dtype=np.uint8)
    if raster.size != w * h:
        raise ValueError(f"{img}: raster truncated")
    raster = raster.reshape(h, w)[::-1]
    value = raster.astype(float) / 255.0
    occ = value if meta.get("negate", 0) else 1.0 - value
    cells = np.full((h, w), UNKNOWN, dtype=np.int8)
    cells[occ > float(meta["occupied_thresh"])] = OCCUPIED
    cells[occ < float(meta["free_thresh"])] = FREE
    ox, oy, yaw = (float(v) for v in meta["origin"])
    return OccupancyGrid(float(meta["resolution"]), Pose(ox, oy, 0.0, yaw=yaw), cells)


def write_manifest(out_dir: str | os.PathLike, files: Mapping[str, str], **info: Any) -> str:
    path = os.path.join(os.fspath(out_dir), "manifest.json")
    doc = dict(info)
    doc["files"] = dict(sorted(files.items()))
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
