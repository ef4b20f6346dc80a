"""Reader for the COLLADA (DAE) subset used for per-element geometry.

Supported: ``<asset><unit meter=..>``, ``<up_axis>`` (Z_UP or Y_UP), one
``<geometry>`` whose mesh holds ``<triangles>`` (or ``<polylist>`` made only of
triangles), and an optional visual-scene node carrying ``<matrix>``,
``<translate>``, ``<rotate>`` or ``<scale>`` transforms.
"""

from __future__ import annotations

import logging
import math
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


class ColladaError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh in meters; ``triangles`` index into ``vertices``."""

    vertices: np.ndarray
    triangles: np.ndarray
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(t) < 1:
            raise ColladaError("mesh has no triangles")
        if not np.all(np.isfinite(v)):
            raise ColladaError("mesh has non-finite vertex coordinates")
        if t.min() < 0 or t.max() >= len(v):
            raise ColladaError("triangle index out of range")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mesh):
            return NotImplemented
        return np.array_equal(self.vertices, other.vertices) and np.array_equal(
            self.triangles, other.triangles
        )

    __hash__ = None  # type: ignore[assignment]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def box_mesh(sx: float, sy: float, sz: float) -> Mesh:
    """Axis-aligned box centred in x/y with its base on z=0."""
    hx, hy = sx / 2.0, sy / 2.0
    v = np.array(
        [
            [-hx, -hy, 0.0], [hx, -hy, 0.0], [hx, hy, 0.0], [-hx, hy, 0.0],
            [-hx, -hy, sz], [hx, -hy, sz], [hx, hy, sz], [-hx, hy, sz],
        ]
    )
    t = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # bottom
            [4, 5, 6], [4, 6, 7],  # top
            [0, 1, 5], [0, 5, 4],
            [1, 2, 6], [1, 6, 5],
            [2, 3, 7], [2, 7, 6],
            [3, 0, 4], [3, 4, 7],
        ]
    )
    return Mesh(v, t)


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _children(el: ET.Element, name: str) -> list[ET.Element]:
    return [c for c in el if _local(c.tag) == name]


def _child(el: ET.Element, name: str) -> ET.Element | None:
    for c in el:
        if _local(c.tag) == name:
            return c
    return None


def _floats(text: str | None) -> list[float]:
    return [float(s) for s in (text or "").split()]


def _node_matrix(node: ET.Element) -> np.ndarray:
    m = np.eye(4)
    for c in node:
        name = _local(c.tag)
        vals = _floats(c.text)
        if name == "matrix":
            if len(vals) != 16:
                raise ColladaError("node <matrix> needs 16 values")
            m = m @ np.array(vals).reshape(4, 4)
        elif name == "translate":
            t = np.eye(4)
            t[:3, 3] = vals[:3]
            m = m @ t
        elif name == "scale":
            s = np.eye(4)
            s[0, 0], s[1, 1], s[2, 2] = vals[:3]
            m = m @ s
        elif name == "rotate":
            ax = np.asarray(vals[:3], dtype=float)
            ax = ax / np.linalg.norm(ax)
            ang = math.radians(vals[3])
            k = np.array([[0, -ax[2], ax[1]], [ax[2], 0, -ax[0]], [-ax[1], ax[0], 0]])
            r = np.eye(4)
            r[:3, :3] = np.eye(3) + math.sin(ang) * k + (1 - math.cos(ang)) * (k @ k)
            m = m @ r
    return m


def _read_source(mesh_el: ET.Element, ref: str) -> np.ndarray:
    src_id = ref.lstrip("#")
    for src in _children(mesh_el, "source"):
        if src.get("id") == src_id:
            fa = _child(src, "float_array")
            if fa is None:
                raise ColladaError(f"source {src_id!r} has no float_array")
            vals = _floats(fa.text)
            stride = 3
            tc = _child(src, "technique_common")
            acc = _child(tc, "accessor") if tc is not None else None
            if acc is not None and acc.get("stride"):
                stride = int(acc.get("stride"))  # type: ignore[arg-type]
            if stride < 3 or len(vals) % stride:
                raise ColladaError(f"source {src_id!r}: bad stride/count")
            return np.array(vals).reshape(-1, stride)[:, :3]
    raise ColladaError(f"unresolved source reference {ref!r}")


def _position_source(mesh_el: ET.Element, vertex_ref: str) -> np.ndarray:
    vid = vertex_ref.lstrip("#")
    for verts in _children(mesh_el, "vertices"):
        if verts.get("id") == vid:
            for inp in _children(verts, "input"):
                if inp.get("semantic") == "POSITION":
                    return _read_source(mesh_el, inp.get("source", ""))
    # some exporters point VERTEX straight at a source
    return _read_source(mesh_el, vertex_ref)


def parse_collada_mesh(path: str | os.PathLike) -> Mesh:
    """Parse one triangle geometry from a DAE file into a :class:`Mesh` in meters."""
    path = os.fspath(path)
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise ColladaError(f"{path}: malformed XML: {exc}") from exc
    if _local(root.tag) != "COLLADA":
        raise ColladaError(f"{path}: root element is {_local(root.tag)!r}, not COLLADA")

    warnings: list[str] = []
    scale = 1.0
    up = "Z_UP"
    asset = _child(root, "asset")
    unit = _child(asset, "unit") if asset is not None else None
    if unit is not None and unit.get("meter") is not None:
        scale = float(unit.get("meter"))  # type: ignore[arg-type]
    else:
        warnings.append("no <unit> declaration; assuming meters")
        logger.warning("%s: no <unit> declaration; assuming meters", path)
    if asset is not None and _child(asset, "up_axis") is not None:
        up = (_child(asset, "up_axis").text or "Z_UP").strip()  # type: ignore[union-attr]
    if up not in ("Z_UP", "Y_UP"):
        raise ColladaError(f"{path}: unsupported up_axis {up!r}")

    geoms = []
    for lib in _children(root, "library_geometries"):
        geoms.extend(_children(lib, "geometry"))
    if not geoms:
        raise ColladaError(f"{path}: no <geometry> found")
    if len(geoms) > 1:
        raise ColladaError(f"{path}: expected one geometry per file, found {len(geoms)}")
    geom = geoms[0]
    mesh_el = _child(geom, "mesh")
    if mesh_el is None:
        raise ColladaError(f"{path}: geometry {geom.get('id')!r} has no <mesh>")

    all_verts: list[np.ndarray] = []
    all_tris: list[np.ndarray] = []
    base = 0
    for prim in mesh_el:
        kind = _local(prim.tag)
        if kind in ("source", "vertices", "extra"):
            continue
        if kind not in ("triangles", "polylist"):
            raise ColladaError(f"{path}: unsupported primitive <{kind}>")
        inputs = _children(prim, "input")
        stride = 1 + max((int(i.get("offset", 0)) for i in inputs), default=0)
        vin = [i for i in inputs if i.get("semantic") == "VERTEX"]
        if not vin:
            raise ColladaError(f"{path}: <{kind}> without VERTEX input")
        voff = int(vin[0].get("offset", 0))
        positions = _position_source(mesh_el, vin[0].get("source", ""))
        idx = np.array([int(s) for s in (_child(prim, "p").text or "").split()], dtype=np.int64) \
            if _child(prim, "p") is not None else np.zeros(0, dtype=np.int64)
        if kind == "polylist":
            vcount = [int(s) for s in ((_child(prim, "vcount").text or "") if _child(prim, "vcount") is not None else "").split()]
            if any(c != 3 for c in vcount):
                raise ColladaError(f"{path}: <polylist> with non-triangle polygons is unsupported")
        if len(idx) % (3 * stride):
            raise ColladaError(f"{path}: <{kind}> index list length not a multiple of 3*{stride}")
        tris = idx.reshape(-1, stride)[:, voff].reshape(-1, 3)
        if len(tris) and (tris.min() < 0 or tris.max() >= len(positions)):
            raise ColladaError(f"{path}: triangle index out of range")
        all_verts.append(positions)
        all_tris.append(tris + base)
        base += len(positions)

    if not all_tris or sum(len(t) for t in all_tris) == 0:
        raise ColladaError(f"{path}: geometry has zero triangles")

    verts = np.vstack(all_verts)
    tris = np.vstack(all_tris)

    xform = np.eye(4)
    geom_id = geom.get("id")
    for lib in _children(root, "library_visual_scenes"):
        for scene in _children(lib, "visual_scene"):
            for node in scene.iter():
                if _local(node.tag) != "node":
                    continue
                for ig in _children(node, "instance_geometry"):
                    if ig.get("url", "").lstrip("#") == geom_id:
                        xform = _node_matrix(node)
    homo = np.hstack([verts, np.ones((len(verts), 1))])
    verts = (homo @ xform.T)[:, :3]
    if up == "Y_UP":
        verts = np.column_stack([verts[:, 0], -verts[:, 2], verts[:, 1]])
    verts = verts * scale
    return Mesh(verts, tris, tuple(warnings))


def write_collada_mesh(mesh: Mesh, path: str | os.PathLike, unit_meter: float = 1.0) -> None:
    """Write a mesh as a minimal DAE file (coordinates divided by ``unit_meter``)."""
    coords = " ".join(repr(float(c)) for c in (mesh.vertices / unit_meter).ravel())
    p = " ".join(str(int(i)) for i in mesh.triangles.ravel())
    nv, nt = len(mesh.vertices), len(mesh.triangles)
    text = f"""<?xml version="1.0" encoding="utf-8"?>
<COLLADA xmlns="http://www.collada.org/2005/11/COLLADASchema" version="1.4.1">
  <asset>
    <unit name="unit" meter="{unit_meter!r}"/>
    <up_axis>Z_UP</up_axis>
  </asset>
  <library_geometries>
    <geometry id="geom" name="geom">
      <mesh>
        <source id="geom-positions">
          <float_array id="geom-positions-array" count="{nv * 3}">{coords}</float_array>
          <technique_common>
            <accessor source="#geom-positions-array" count="{nv}" stride="3">
              <param name="X" type="float"/>
              <param name="Y" type="float"/>
              <param name="Z" type="float"/>
            </accessor>
          </technique_common>
        </source>
        <vertices id="geom-vertices">
          <input semantic="POSITION" source="#geom-positions"/>
        </vertices>
        <triangles count="{nt}">
          <input semantic="VERTEX" source="#geom-vertices" offset="0"/>
          <p>{p}</p>
        </triangles>
      </mesh>
    </geometry>
  </library_geometries>
  <library_visual_scenes>
    <visual_scene id="scene">
      <node id="node" name="node">
        <instance_geometry url="#geom"/>
      </node>
    </visual_scene>
  </library_visual_scenes>
  <scene>
    <instance_visual_scene url="#scene"/>
  </scene>
</COLLADA>
"""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
