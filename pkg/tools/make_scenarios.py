"""Regenerate the bundled scenario fixtures under src/bimrobo/data/scenarios/.

The building is a single-storey two-bedroom unit, 14 m x 9 m, with a living
area to the south and two bedrooms to the north. Eleven wood frames form the
bedroom closet walls and a living-room partition. Layout numbers below are
fixture choices; they only need to reproduce the qualitative situation of
a 0.9 m doorway on the way to every bedroom.

    python tools/make_scenarios.py
"""

from __future__ import annotations

import math
import os
import shutil

import numpy as np
import yaml

from bimrobo.collada import Mesh, box_mesh, write_collada_mesh

ROOT = os.path.join(os.path.dirname(__file__), "..", "src", "bimrobo", "data", "scenarios")

WALL_T = 0.2
WALL_H = 2.7
DOOR = 0.9
FRAME = (1.2, 0.1, 2.4)
PICK_POINT = [0.0, 0.0, 1.2]
START = "2022-05-10"


def frame_mesh() -> Mesh:
    """Stud frame: bottom and top plates plus four studs, base on z=0."""
    w, t, h = FRAME
    plate = 0.05
    parts = [((0.0, 0.0, 0.0), (w, t, plate)), ((0.0, 0.0, h - plate), (w, t, plate))]
    for x in (-w / 2 + 0.025, -0.2, 0.2, w / 2 - 0.025):
        parts.append(((x, 0.0, plate), (0.05, t, h - 2 * plate)))
    verts, tris = [], []
    for (cx, cy, cz), size in parts:
        m = box_mesh(*size)
        tris.append(m.triangles + sum(len(v) for v in verts))
        verts.append(m.vertices + np.array([cx, cy, cz]))
    return Mesh(np.vstack(verts), np.vstack(tris))


def box(eid, name, x0, x1, y0, y1, z0, z1, task=None, category="building", tags=(), yaw=0.0):
    el = {
        "id": eid,
        "name": name,
        "category": category,
        "geometry": {"box": [round(x1 - x0, 6), round(y1 - y0, 6), round(z1 - z0, 6)]},
        "placement": [round((x0 + x1) / 2, 6), round((y0 + y1) / 2, 6), z0, 0.0, 0.0, yaw],
    }
    if task:
        el["linked_task_id"] = task
    if tags:
        el["tags"] = list(tags)
    return el


def walls(doors: float) -> list[dict]:
    """Shell and interior walls; ``doors`` is the width of every door opening."""
    t = "T-walls"
    e = []
    ent = (7.0 - doors / 2, 7.0 + doors / 2)
    e.append(box("wall_s1", "South wall west", 0.0, ent[0], 0.0, WALL_T, 0.0, WALL_H, t))
    e.append(box("wall_s2", "South wall east", ent[1], 14.0, 0.0, WALL_T, 0.0, WALL_H, t))
    e.append(box("wall_n", "North wall", 0.0, 14.0, 9.0 - WALL_T, 9.0, 0.0, WALL_H, t))
    e.append(box("wall_w", "West wall", 0.0, WALL_T, WALL_T, 9.0 - WALL_T, 0.0, WALL_H, t))
    e.append(box("wall_e", "East wall", 14.0 - WALL_T, 14.0, WALL_T, 9.0 - WALL_T, 0.0, WALL_H, t))
    d1 = (5.5 - doors / 2, 5.5 + doors / 2)
    d2 = (8.5 - doors / 2, 8.5 + doors / 2)
    e.append(box("wall_i1", "Corridor wall west", WALL_T, d1[0], 4.9, 5.1, 0.0, WALL_H, t))
    e.append(box("wall_i2", "Corridor wall middle", d1[1], d2[0], 4.9, 5.1, 0.0, WALL_H, t))
    e.append(box("wall_i3", "Corridor wall east", d2[1], 14.0 - WALL_T, 4.9, 5.1, 0.0, WALL_H, t))
    e.append(box("wall_b", "Bedroom separating wall", 6.9, 7.1, 5.1, 9.0 - WALL_T, 0.0, WALL_H, t))
    return e


def frames(with_points: bool) -> list[dict]:
    # bedroom 1 closet wall, bedroom 2 closet wall, living room partition
    spots = [(x, 7.6, 0.0) for x in (0.9, 2.1, 3.3, 4.5)]
    spots += [(x, 7.6, 0.0) for x in (13.1, 11.9, 10.7, 9.5)]
    spots += [(11.0, y, -math.pi / 2) for y in (1.0, 2.2, 3.4)]
    out = []
    for i, (x, y, yaw) in enumerate(spots):
        el = {
            "id": f"frame_{i}",
            "name": f"Frame {i + 1}",
            "category": "building",
            "geometry": {"mesh": "../meshes/frame.dae"},
            "placement": [x, y, 0.1, 0.0, 0.0, yaw],
            "linked_task_id": "T-framing",
        }
        if with_points:
            el["local_points"] = {"pick_point": list(PICK_POINT)}
        out.append(el)
    return out


def shell(doors: float = DOOR) -> list[dict]:
    e = [box("floor", "Floor slab", 0.0, 14.0, 0.0, 9.0, 0.0, 0.1, "T-floor")]
    e += walls(doors)
    e.append(box("roof", "Roof slab", 0.0, 14.0, 0.0, 9.0, 2.7, 2.9, "T-roof"))
    e.append(box("site_office", "Site office container", 0.5, 3.5, -6.0, -4.0, 0.0, 2.6,
                 category="site_object", tags=("site_office",)))
    return e


def outdoor_storage(fenced: bool = False) -> list[dict]:
    e = [
        box("storage_outdoor", "Frame material storage", 17.0, 19.0, -5.0, -4.0, 0.0, 1.0,
            category="storage", tags=("frame_material_storage",)),
        box("pickup_outdoor", "Frame pickup location", 17.0, 18.0, -3.5, -2.5, 0.0, 0.01,
            category="zone_marker", tags=("pickup_location", "frame_material_storage"),
            yaw=-math.pi / 2),
    ]
    if fenced:
        for i, (x0, x1, y0, y1) in enumerate([(15.8, 20.2, -5.8, -5.7), (15.8, 20.2, -1.9, -1.8),
                                               (15.8, 15.9, -5.8, -1.8), (20.1, 20.2, -5.8, -1.8)]):
            e.append(box(f"fence_{i}", "Storage fence", x0, x1, y0, y1, 0.0, 2.0,
                         category="site_object", tags=("fence",)))
    return e


def indoor_storage() -> list[dict]:
    return [
        box("storage_indoor", "Frame material storage (living area)", 0.5, 1.5, 1.5, 3.5, 0.1, 1.1,
            category="storage", tags=("frame_material_storage",)),
        box("pickup_indoor", "Frame pickup location (living area)", 1.8, 2.8, 2.0, 3.0, 0.09, 0.1,
            category="zone_marker", tags=("pickup_location", "frame_material_storage"),
            yaw=math.pi),
    ]


def site_zones() -> list[dict]:
    return [
        box("entrance_zone", "Entrance slow zone", 6.0, 8.0, -1.5, 0.0, 0.0, 0.01,
            category="zone_marker", tags=("slow_zone",)),
        box("drop_zone", "Material drop zone", 10.0, 12.0, -3.2, -2.2, 0.0, 0.01,
            category="zone_marker", tags=("no_robot_zone",)),
    ]


def tasks() -> list[dict]:
    return [
        {"id": "T-floor", "name": "Floor slab", "start_date": "2022-04-01",
         "finish_date": "2022-04-08", "element_ids": ["floor"]},
        {"id": "T-walls", "name": "Exterior and interior walls", "start_date": "2022-04-11",
         "finish_date": "2022-04-29",
         "element_ids": [e["id"] for e in walls(DOOR)]},
        {"id": "T-roof", "name": "Roof", "start_date": "2022-05-02", "finish_date": "2022-05-06",
         "element_ids": ["roof"]},
        {"id": "T-framing", "name": "Frame interior wood partition", "start_date": "2022-05-10",
         "finish_date": "2022-05-23", "robotization": True, "task_spec_id": "I-W-F-#1",
         "element_ids": [f"frame_{i}" for i in range(11)]},
        {"id": "T-drywall", "name": "Drywall", "start_date": "2022-05-24",
         "finish_date": "2022-06-10", "robotization": False, "element_ids": []},
    ]


def site_params(initial, zones: bool) -> dict:
    p = {
        "allowable_robot_footprint_radius_max": 0.6,
        "allowable_robot_weight_max": 100.0,
        "nav_speed_min": 0.1,
        "nav_speed_max": 0.3,  # calibration constant for indoor jobsite travel
        "user_params": {"robot_initial_pose": list(initial)},
    }
    if zones:
        p["prohibited_zones"] = ["drop_zone"]
        p["zone_speed_caps"] = {"entrance_zone": 0.2}
    return p


def project(name, elements, initial, zones=True) -> dict:
    return {
        "schema_version": 1,
        "name": name,
        "simulation_start_date": START,
        "site_params": site_params(initial, zones),
        "elements": elements,
        "tasks": tasks(),
    }


def agents(case: str) -> dict:
    carpenters = [
        {"agent_id": "carpenter_1", "role": "carpenter 1", "speed": 0.5, "loop": True,
         "waypoints": [{"pose": [15.0, -3.5], "dwell": 5.0}, {"pose": [20.0, -3.5], "dwell": 5.0}]},
        {"agent_id": "carpenter_2", "role": "carpenter 2", "speed": 0.4, "loop": True,
         "waypoints": [{"pose": [2.0, -2.5], "dwell": 20.0}, {"pose": [12.0, -2.5], "dwell": 20.0}]},
    ]
    supervisor = {"agent_id": "supervisor", "role": "supervisor", "speed": 0.6, "loop": True,
                  "waypoints": [{"pose": [-3.0, 0.0], "dwell": 30.0}, {"pose": [-3.0, 9.0], "dwell": 30.0}]}
    return {"schema_version": 1, "agents": carpenters + [supervisor]}


def scenario(description: str, with_agents: bool) -> dict:
    s = {
        "description": description,
        "project": "project.yaml",
        "kb": ["default"],
        "fleet": "default",
        "resolution": 0.05,
        "z_band": [0.1, 1.8],
        "margin": 1.0,
        "sim": {"dt": 0.1, "abort_on_failure": False, "reorient_duration": 8.0, "margin": 0.0},
    }
    if with_agents:
        s["agents"] = "agents.yaml"
    return s


def write(name: str, proj: dict, scen: dict, agent_doc: dict | None = None) -> None:
    d = os.path.join(ROOT, name)
    os.makedirs(d, exist_ok=True)
    for fname, doc in (("project.yaml", proj), ("scenario.yaml", scen), ("agents.yaml", agent_doc)):
        if doc is None:
            continue
        with open(os.path.join(d, fname), "w", encoding="utf-8") as fh:
            yaml.safe_dump(doc, fh, sort_keys=False, default_flow_style=None)


def main() -> None:
    if os.path.isdir(ROOT):
        shutil.rmtree(ROOT)
    os.makedirs(os.path.join(ROOT, "meshes"))
    write_collada_mesh(frame_mesh(), os.path.join(ROOT, "meshes", "frame.dae"))

    outside = (15.0, -1.0, 0.0, 0.0, 0.0, 0.0)
    inside = (3.0, 1.0, 0.0, 0.0, 0.0, 0.0)
    write("two_bedroom_unaugmented",
          project("two_bedroom", shell() + frames(False) + site_zones(), outside),
          scenario("Two-bedroom unit as designed, before robot modeling requirements are added", False))
    write("two_bedroom",
          project("two_bedroom", shell() + frames(True) + outdoor_storage() + site_zones(), outside),
          scenario("Two-bedroom unit with storage, pickup location and pick points modeled", False))
    write("case1",
          project("two_bedroom_case1", shell() + frames(True) + outdoor_storage() + site_zones(), outside),
          scenario("Case 1: frame storage outside the building", True), agents("case1"))
    write("case2",
          project("two_bedroom_case2", shell() + frames(True) + indoor_storage() + site_zones(), inside),
          scenario("Case 2: frame storage relocated into the living area", True), agents("case2"))
    write("widened",
          project("two_bedroom_widened", shell(doors=2.0) + frames(True) + outdoor_storage() + site_zones(),
                  outside),
          scenario("Case 1 with every door opening widened to 2.0 m", True), agents("case1"))
    write("walled_off",
          project("two_bedroom_walled_off",
                  shell() + frames(True) + outdoor_storage(fenced=True) + site_zones(), outside),
          scenario("Case 1 with the outdoor storage fenced off", True), agents("case1"))


if __name__ == "__main__":
    main()
