"""Poses, rotations and small 2D polygon helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

Point2 = tuple[float, float]
Point3 = tuple[float, float, float]
Matrix3 = tuple[tuple[float, float, float], tuple[float, float, float], tuple[float, float, float]]

TWO_PI = 2.0 * math.pi


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = math.remainder(a, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r + 0.0  # drops -0.0


def rpy_to_matrix(roll: float, pitch: float, yaw: float) -> Matrix3:
    # R = Rz(yaw) @ Ry(pitch) @ Rx(roll), the SDF/URDF fixed-axis convention
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return (
        (cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr),
        (sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr),
        (-sp, cp * sr, cp * cr),
    )


def matrix_to_rpy(m: Matrix3) -> tuple[float, float, float]:
    sp = -m[2][0]
    if sp >= 1.0 - 1e-12 or sp <= -1.0 + 1e-12:
        # gimbal lock: fold roll into yaw
        pitch = math.copysign(math.pi / 2.0, sp)
        return 0.0, pitch, math.atan2(-m[0][1], m[1][1])
    pitch = math.asin(sp)
    roll = math.atan2(m[2][1], m[2][2])
    yaw = math.atan2(m[1][0], m[0][0])
    return roll, pitch, yaw


def _matmul(a: Matrix3, b: Matrix3) -> Matrix3:
    return tuple(  # type: ignore[return-value]
        tuple(a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j] for j in range(3))
        for i in range(3)
    )


def _matvec(m: Matrix3, v: Sequence[float]) -> Point3:
    return (
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    )


@dataclass(frozen=True)
class Pose:
    """Position in meters plus roll/pitch/yaw in radians (XYZRPY)."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self) -> None:
        for name in ("x", "y", "z", "roll", "pitch", "yaw"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"pose field {name} is not finite: {v}")
            if name in ("roll", "pitch", "yaw"):
                v = normalize_angle(v)
            object.__setattr__(self, name, v + 0.0)

    @classmethod
    def from_seq(cls, values: Sequence[float]) -> "Pose":
        if len(values) not in (2, 3, 6):
            raise ValueError(f"pose needs 2, 3 or 6 numbers, got {len(values)}")
        if len(values) == 2:
            return cls(values[0], values[1])
        if len(values) == 3:
            return cls(values[0], values[1], values[2])
        return cls(*values)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.z, self.roll, self.pitch, self.yaw]

    @property
    def xy(self) -> Point2:
        return (self.x, self.y)

    def rotation(self) -> Matrix3:
        return rpy_to_matrix(self.roll, self.pitch, self.yaw)

    def transform_point(self, p: Sequence[float]) -> Point3:
        r = _matvec(self.rotation(), p)
        return (r[0] + self.x, r[1] + self.y, r[2] + self.z)

    def compose(self, other: "Pose") -> "Pose":
        """Return self * other, i.e. `other` expressed in the frame of `self`."""
        rot = self.rotation()
        t = _matvec(rot, (other.x, other.y, other.z))
        roll, pitch, yaw = matrix_to_rpy(_matmul(rot, other.rotation()))
        return Pose(self.x + t[0], self.y + t[1], self.z + t[2], roll, pitch, yaw)

    def inverse(self) -> "Pose":
        rot = self.rotation()
        rt = tuple(tuple(rot[j][i] for j in range(3)) for i in range(3))
        t = _matvec(rt, (-self.x, -self.y, -self.z))  # type: ignore[arg-type]
        roll, pitch, yaw = matrix_to_rpy(rt)  # type: ignore[arg-type]
        return Pose(t[0], t[1], t[2], roll, pitch, yaw)


def convex_hull(points: Iterable[Point2]) -> list[Point2]:
    """Counter-clockwise hull (Andrew's monotone chain), collinear points dropped.

    Degenerate inputs return the distinct extreme points (0, 1 or 2 of them).
    """
    pts = sorted(set((float(x) + 0.0, float(y) + 0.0) for x, y in points))
    if len(pts) <= 2:
        return pts

    def cross(o: Point2, a: Point2, b: Point2) -> float:
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[Point2] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point2] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return hull


def polygon_area(poly: Sequence[Point2]) -> float:
    if len(poly) < 3:
        return 0.0
    s = 0.0
    for i, (x0, y0) in enumerate(poly):
        x1, y1 = poly[(i + 1) % len(poly)]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def point_in_convex(poly: Sequence[Point2], p: Point2, eps: float = 1e-12) -> bool:
    """True if p lies inside or on a counter-clockwise convex polygon."""
    if len(poly) < 3:
        return False
    for i, (x0, y0) in enumerate(poly):
        x1, y1 = poly[(i + 1) % len(poly)]
        if (x1 - x0) * (p[1] - y0) - (y1 - y0) * (p[0] - x0) < -eps:
            return False
    return True
