"""Shared fixtures: bundled scenario runs (cached), random small scenarios and
the simulation invariant checks used by the engine and acceptance tests."""

from __future__ import annotations

import math
import os
import random
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import yaml

from bimrobo._io import data_path
from bimrobo.fleet import RobotDescriptor, load_fleet
from bimrobo.geometry import Pose, rpy_to_matrix
from bimrobo.kb import KnowledgeBase, load_kb, lookup_spec
from bimrobo.model import Project, element_footprint, load_project
from bimrobo.sim import SimParams, compile_plan, load_agents, run
from bimrobo.sim.trace import Trace
from bimrobo.worldgen import OCCUPIED, SimWorld, build_world

SCENARIOS = data_path("scenarios")
SHIPPED = ("two_bedroom", "case1", "case2", "widened", "walled_off")

# (label, passed, detail) per acceptance criterion, printed by conftest
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def scenario_dir(name: str) -> str:
    return os.path.join(SCENARIOS, name)


@dataclass
class Loaded:
    project: Project
    kb: KnowledgeBase
    world: SimWorld
    agents: list
    robot: RobotDescriptor
    plans: list
    params: SimParams


def load_dir(path: str, dt: float | None = None) -> Loaded:
    with open(os.path.join(path, "scenario.yaml"), encoding="utf-8") as fh:
        scen = yaml.safe_load(fh)
    project = load_project(os.path.join(path, scen["project"]))
    kb = load_kb()
    agents = load_agents(os.path.join(path, scen["agents"])) if scen.get("agents") else []
    world = build_world(project, z_band=scen["z_band"], resolution=scen["resolution"],
                        margin=scen["margin"], agents=agents)
    robot = load_fleet()[0]
    plans = []
    for task in project.tasks:
        if task.robotization:
            plans += compile_plan(task, lookup_spec(kb, task.task_spec_id), world, robot, kb)
    sim = dict(scen.get("sim") or {})
    if dt is not None:
        sim["dt"] = dt
    return Loaded(project, kb, world, agents, robot, plans, SimParams(**sim))


@lru_cache(maxsize=None)
def load(name: str, dt: float | None = None) -> Loaded:
    return load_dir(scenario_dir(name), dt)


@lru_cache(maxsize=None)
def simulate(name: str, dt: float | None = None) -> Trace:
    s = load(name, dt)
    return run(s.world, s.plans, s.agents, s.params, s.robot)


# -- random small scenarios ---------------------------------------------------------

def _box(eid, x0, x1, y0, y1, z0, z1, category="building", task=None, tags=(), yaw=0.0, points=None):
    el = {"id": eid, "name": eid, "category": category,
          "geometry": {"box": [x1 - x0, y1 - y0, z1 - z0]},
          "placement": [(x0 + x1) / 2, (y0 + y1) / 2, z0, 0.0, 0.0, yaw]}
    if task:
        el["linked_task_id"] = task
    if tags:
        el["tags"] = list(tags)
    if points:
        el["local_points"] = points
    return el


def random_scenario(seed: int, out_dir: str) -> str:
    """A one-room site with a south door, outdoor storage, 1-3 frames and 0-2 workers.

    Returns the scenario directory. Frames are boxes, so no mesh files are needed.
    """
    rng = random.Random(seed)
    W = rng.uniform(6.0, 9.0)
    H = rng.uniform(5.0, 7.0)
    door = rng.choice([0.9, 1.0, 1.5, 2.0])
    dx = rng.uniform(1.5, W - 1.5 - door)
    t = 0.2
    walls = [
        _box("w_s1", 0, dx, 0, t, 0, 2.5, task="T-walls"),
        _box("w_s2", dx + door, W, 0, t, 0, 2.5, task="T-walls"),
        _box("w_n", 0, W, H - t, H, 0, 2.5, task="T-walls"),
        _box("w_w", 0, t, t, H - t, 0, 2.5, task="T-walls"),
        _box("w_e", W - t, W, t, H - t, 0, 2.5, task="T-walls"),
    ]
    sx = rng.uniform(1.0, W - 3.0)
    site = [
        _box("storage", sx, sx + 2.0, -5.0, -4.0, 0, 1.0, category="storage",
             tags=("frame_material_storage",)),
        _box("pickup", sx + 0.5, sx + 1.5, -3.5, -2.5, 0, 0.01, category="zone_marker",
             tags=("pickup_location", "frame_material_storage"), yaw=-math.pi / 2),
    ]
    frames = []
    n = rng.randint(1, 3)
    for i in range(n):
        # along the north wall, each frame in its own slot
        x = 1.2 + i * 1.3 + rng.uniform(0.0, 0.05)
        if x + 0.6 > W - 1.0:
            break
        y = H - t - 1.0
        frames.append(_box(f"frame_{i}", x - 0.6, x + 0.6, y - 0.05, y + 0.05, 0.0, 2.4,
                           task="T-frame", points={"pick_point": [0.0, 0.0, 1.2]}))
    elements = walls + site + frames
    tasks = [
        {"id": "T-walls", "name": "walls", "start_date": "2022-04-01", "finish_date": "2022-04-20",
         "element_ids": [w["id"] for w in walls]},
        {"id": "T-frame", "name": "framing", "start_date": "2022-05-01", "finish_date": "2022-05-05",
         "robotization": True, "task_spec_id": "I-W-F-#1", "element_ids": [f["id"] for f in frames]},
    ]
    project = {
        "schema_version": 1, "name": f"random_{seed}", "simulation_start_date": "2022-05-01",
        "site_params": {"nav_speed_min": 0.1, "nav_speed_max": rng.choice([0.3, 0.5, 1.0]),
                        "user_params": {"robot_initial_pose": [sx + 1.0, -1.5, 0, 0, 0, 0]}},
        "elements": elements, "tasks": tasks,
    }
    agents = []
    for k in range(rng.randint(0, 2)):
        a = (rng.uniform(-2, W + 2), rng.uniform(-6, -1))
        b = (rng.uniform(-2, W + 2), rng.uniform(-6, -1))
        agents.append({"agent_id": f"worker_{k}", "role": "worker", "speed": rng.uniform(0.3, 0.8),
                       "loop": rng.random() < 0.5,
                       "waypoints": [{"pose": list(a), "dwell": rng.uniform(0, 5)},
                                     {"pose": list(b), "dwell": rng.uniform(0, 5)}]})
    d = os.path.join(out_dir, f"random_{seed}")
    os.makedirs(d, exist_ok=True)
    scen = {"project": "project.yaml", "kb": ["default"], "fleet": "default", "resolution": 0.05,
            "z_band": [0.1, 1.8], "margin": 1.0,
            "sim": {"dt": rng.choice([0.1, 0.2]), "reorient_duration": 8.0, "margin": 0.0}}
    if agents:
        scen["agents"] = "agents.yaml"
        with open(os.path.join(d, "agents.yaml"), "w", encoding="utf-8") as fh:
            yaml.safe_dump({"schema_version": 1, "agents": agents}, fh)
    for name, doc in (("project.yaml", project), ("scenario.yaml", scen)):
        with open(os.path.join(d, name), "w", encoding="utf-8") as fh:
            yaml.safe_dump(doc, fh, sort_keys=False)
    return d


# -- invariants ---------------------------------------------------------------------

def _h(p: Pose) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = np.array(rpy_to_matrix(p.roll, p.pitch, p.yaw))
    m[:3, 3] = (p.x, p.y, p.z)
    return m


def _h_list(v) -> np.ndarray:
    return _h(Pose.from_seq(v))


def check_attach_rigidity(trace: Trace) -> int:
    """Ticks whose carried object pose departs from the robot-arm-grip chain."""
    carry = {k: _h_list(v) for k, v in trace.header["carry_transforms"].items()}
    rot = {k: _h_list(v) for k, v in trace.header["carry_rotations"].items()}
    bad = 0
    prev_rel = None
    for k in trace.ticks:
        if k.attached is None:
            prev_rel = None
            if k.object_pose is not None:
                bad += 1
            continue
        grip = np.eye(4)
        grip[:3, 3] = [-v for v in k.pick_point]
        want = _h(k.robot) @ carry[k.arm_pose] @ rot[k.orientation] @ grip
        got = _h(k.object_pose)
        if not np.allclose(want, got, rtol=0.0, atol=1e-12):
            bad += 1
        rel = (k.arm_pose, k.orientation, np.linalg.inv(_h(k.robot)) @ got)
        if prev_rel is not None and prev_rel[:2] == rel[:2] and not np.allclose(prev_rel[2], rel[2], rtol=0.0, atol=1e-12):
            bad += 1
        prev_rel = rel
    return bad


def _occupied_squares(grid):
    rr, cc = np.nonzero(grid.cells == OCCUPIED)
    x0 = grid.origin.x + cc * grid.resolution
    y0 = grid.origin.y + rr * grid.resolution
    return x0, y0


def static_collisions(trace: Trace, world: SimWorld, radius: float) -> int:
    """Ticks where a disc of ``radius`` at the robot overlaps an occupied cell square,
    counting installed elements from their install event on."""
    res = world.grid.resolution
    grid = world.grid
    x0, y0 = _occupied_squares(grid)
    bad = 0
    installed_at_tick: tuple = ()
    for k in trace.ticks:
        if k.installed != installed_at_tick:
            new = [world.project.element(e) for e in k.installed if e not in installed_at_tick]
            grid = grid.with_footprints(element_footprint(el, world.z_band) for el in new)
            x0, y0 = _occupied_squares(grid)
            installed_at_tick = k.installed
        px, py = k.robot.x, k.robot.y
        near = (np.abs(x0 - px) < radius + res) & (np.abs(y0 - py) < radius + res)
        if not near.any():
            continue
        ax, ay = x0[near], y0[near]
        dx = np.maximum(np.maximum(ax - px, 0.0), px - (ax + res))
        dy = np.maximum(np.maximum(ay - py, 0.0), py - (ay + res))
        if np.min(np.hypot(dx, dy)) < radius - 1e-9:
            bad += 1
    return bad


def install_permanence(trace: Trace) -> bool:
    targets = trace.header["targets"]
    for e in trace.events_of("install"):
        if e.payload["pose"] != targets[e.payload["element"]]:
            return False
    seen: tuple = ()
    for k in trace.ticks:
        if k.installed[:len(seen)] != seen:
            return False
        if k.attached is not None and k.attached in k.installed:
            return False
        seen = k.installed
    return True


def _rounding_eps(a, b, cap: float) -> float:
    """A few rounding units of the stored tick time and coordinates, the quantities the
    displacement check is computed from."""
    coords = (a.robot.x, a.robot.y, b.robot.x, b.robot.y)
    return cap * 4 * math.ulp(b.t) + 4 * max(math.ulp(v) for v in coords)


def speed_violations(trace: Trace) -> int:
    h = trace.header
    limit = min(h["robot_max_speed"], h["site_speed_max"])
    bad = 0
    for a, b in zip(trace.ticks, trace.ticks[1:]):
        dt = b.t - a.t
        d = math.hypot(b.robot.x - a.robot.x, b.robot.y - a.robot.y)
        if b.speed_cap > limit or d > b.speed_cap * dt + _rounding_eps(a, b, b.speed_cap):
            bad += 1
    return bad


def conservation_ok(trace: Trace, scheduled: set[str]) -> bool:
    installs = [e.payload["element"] for e in trace.events_of("install")]
    if len(installs) != len(set(installs)) or not set(installs) <= scheduled:
        return False
    failed = {e.payload["plan"] for e in trace.events_of("failure")}
    if not trace.header["params"]["abort_on_failure"]:
        if len(installs) + len(failed) != len(trace.header["plans"]):
            return False
    last = trace.ticks[-1].installed if trace.ticks else ()
    if set(last) != set(installs):
        return False
    for k in trace.ticks:
        held = {k.attached} - {None}
        if held & set(k.installed) or not held <= scheduled:
            return False
    return True
