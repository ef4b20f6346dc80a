"""Robot descriptors, capability matching and the named arm pose library."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from ._io import InputError, context, data_path, load_yaml_validated
from .geometry import Pose
from .model import SiteParams

DEFAULT_FLEET_PATH = data_path("default_fleet.yaml")

# poses every robot running the frame installation task specification must provide
FRAME_INSTALL_POSES = ("default", "NV-1", "NV-2", "MM-G-1", "MM-R-1")


class FleetError(InputError):
    pass


class PoseNotFound(KeyError):
    def __str__(self) -> str:
        return str(self.args[0])


@dataclass(frozen=True)
class ArmPose:
    pose_name: str
    transition_duration: float = 0.0
    lateral_extent: float = 0.0
    carried_object_transform: Pose | None = None

    def __post_init__(self) -> None:
        for name in ("transition_duration", "lateral_extent"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"pose {self.pose_name}: {name} must be finite and >= 0, got {v}")

    @property
    def carries(self) -> bool:
        return self.carried_object_transform is not None


@dataclass(frozen=True)
class RobotDescriptor:
    id: str
    capabilities: frozenset[str]
    footprint_radius: float
    max_speed: float
    pose_library: Mapping[str, ArmPose]
    base_half_width: float | None = None
    height: float = 0.0
    weight: float = 0.0
    arm_reach: float = 0.0
    skill_pose_sequences: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (self.footprint_radius > 0 and math.isfinite(self.footprint_radius)):
            raise ValueError(f"robot {self.id}: footprint_radius must be positive")
        if not (self.max_speed > 0 and math.isfinite(self.max_speed)):
            raise ValueError(f"robot {self.id}: max_speed must be positive")
        if self.base_half_width is not None and self.base_half_width > self.footprint_radius:
            raise ValueError(f"robot {self.id}: base_half_width exceeds footprint_radius")
        for skill, seq in self.skill_pose_sequences.items():
            for name in seq:
                if name not in self.pose_library:
                    raise ValueError(f"robot {self.id}: skill {skill} uses unknown pose {name!r}")

    @property
    def inflation_radius(self) -> float:
        """Half-width used to inflate the map; the circumscribed radius if none is given."""
        return self.base_half_width if self.base_half_width is not None else self.footprint_radius

    def poses_for(self, skill_id: str) -> tuple[str, ...]:
        try:
            return self.skill_pose_sequences[skill_id]
        except KeyError:
            raise PoseNotFound(f"robot {self.id} has no pose sequence for skill {skill_id}") from None


def _robot_from_dict(raw: Mapping) -> RobotDescriptor:
    poses: dict[str, ArmPose] = {}
    for p in raw["pose_library"]:
        if p["pose_name"] in poses:
            raise ValueError(f"duplicate pose {p['pose_name']!r}")
        cot = p.get("carried_object_transform")
        poses[p["pose_name"]] = ArmPose(
            p["pose_name"], float(p["transition_duration"]), float(p["lateral_extent"]),
            Pose.from_seq(cot) if cot is not None else None,
        )
    return RobotDescriptor(
        id=raw["id"],
        capabilities=frozenset(raw["capabilities"]),
        footprint_radius=float(raw["footprint_radius"]),
        max_speed=float(raw["max_speed"]),
        pose_library=poses,
        base_half_width=float(raw["base_half_width"]) if "base_half_width" in raw else None,
        height=float(raw.get("height", 0.0)),
        weight=float(raw.get("weight", 0.0)),
        arm_reach=float(raw.get("arm_reach", 0.0)),
        skill_pose_sequences={k: tuple(v) for k, v in raw.get("skill_pose_sequences", {}).items()},
    )


def load_fleet(path: str | os.PathLike | None = None) -> list[RobotDescriptor]:
    """Load a fleet file; ``None`` loads the shipped ``husky_ur5`` fleet."""
    path = DEFAULT_FLEET_PATH if path is None else os.fspath(path)
    data, lines = load_yaml_validated(path, "fleet")
    robots: list[RobotDescriptor] = []
    seen: set[str] = set()
    for i, raw in enumerate(data["robots"]):
        where = context(path, lines, ("robots", i))
        if raw["id"] in seen:
            raise FleetError(f"{where}: duplicate robot id {raw['id']!r}")
        seen.add(raw["id"])
        try:
            robots.append(_robot_from_dict(raw))
        except ValueError as exc:
            raise FleetError(f"{where}: {exc}") from exc
    return robots


def robot_qualifies(robot: RobotDescriptor, required_caps: Iterable[str], site: SiteParams) -> bool:
    return (set(required_caps) <= robot.capabilities
            and robot.footprint_radius <= site.allowable_robot_footprint_radius_max
            and robot.weight <= site.allowable_robot_weight_max)


def match_robots(fleet: Sequence[RobotDescriptor], required_caps: Iterable[str],
                 site: SiteParams) -> list[RobotDescriptor]:
    """Robots meeting the capability set and the jobsite limits, in fleet order."""
    caps = frozenset(required_caps)
    return [r for r in fleet if robot_qualifies(r, caps, site)]


def pose_lookup(robot: RobotDescriptor, pose_name: str) -> ArmPose:
    try:
        return robot.pose_library[pose_name]
    except KeyError:
        names = ", ".join(robot.pose_library)
        raise PoseNotFound(f"robot {robot.id} has no pose {pose_name!r}; available: {names}") from None


def missing_poses(robot: RobotDescriptor, required: Iterable[str] = FRAME_INSTALL_POSES) -> list[str]:
    return [p for p in required if p not in robot.pose_library]
