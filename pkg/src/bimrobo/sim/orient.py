"""Carried-object orientation along a path from corridor clearance."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import distance_transform_edt

from ..fleet import RobotDescriptor, pose_lookup
from ..geometry import Point3, Pose
from ..model import Element
from ..worldgen import FREE, OccupancyGrid
from .planner import SQRT2, Path, PlanningError

HORIZONTAL = "horizontal"
SIDEWAYS = "sideways"

# Object rotation relative to the grip frame (x forward, z up). Horizontal lays
# the element flat with its width across the direction of travel and its height
# along it; sideways additionally rolls it a quarter turn about the travel axis.
CARRY_ROTATION = {
    HORIZONTAL: Pose(roll=math.pi / 2, yaw=math.pi / 2),
}
CARRY_ROTATION[SIDEWAYS] = Pose(roll=math.pi / 2).compose(CARRY_ROTATION[HORIZONTAL])


class OrientationError(PlanningError):
    def __init__(self, segment: int, cell: tuple[int, int], clearance: float, needed: float):
        super().__init__(
            "no_orientation_fits",
            f"segment {segment} at cell {cell}: clearance {clearance:.3f} m is below the "
            f"{needed:.3f} m needed even when carried sideways")
        self.segment = segment
        self.cell = cell
        self.clearance = clearance
        self.needed = needed


def _half_extents(element: Element, pick_point: Point3, orient: str) -> tuple[float, float]:
    """Largest offsets from the grip (along travel, across travel) in a carry orientation."""
    lo, hi = element.geometry.mesh().bounds()
    rot = CARRY_ROTATION[orient]
    along = across = 0.0
    for x in (lo[0], hi[0]):
        for y in (lo[1], hi[1]):
            for z in (lo[2], hi[2]):
                p = rot.transform_point((x - pick_point[0], y - pick_point[1], z - pick_point[2]))
                along = max(along, abs(p[0]))
                across = max(across, abs(p[1]))
    return along, across


def carried_extent(element: Element, pick_point: Point3) -> tuple[float, float]:
    """(length, width): twice the largest offset across the direction of travel from the
    grip, carried horizontally and sideways."""
    return (2.0 * _half_extents(element, pick_point, HORIZONTAL)[1],
            2.0 * _half_extents(element, pick_point, SIDEWAYS)[1])


def carried_reach(element: Element, pick_point: Point3) -> float:
    """How far the carried element sticks out ahead of (or behind) the grip."""
    return max(_half_extents(element, pick_point, o)[0] for o in (HORIZONTAL, SIDEWAYS))


def clearance_map(grid: OccupancyGrid) -> np.ndarray:
    """Distance in meters from each free cell centre to the nearest non-free cell edge
    (centre distance minus half a cell); zero on non-free cells."""
    occ = grid.cells != FREE
    if not occ.any():
        return np.full(grid.cells.shape, np.inf)
    d = distance_transform_edt(~occ, sampling=grid.resolution) - grid.resolution / 2.0
    d[occ] = 0.0
    return d


def corridor_clearance(dist: np.ndarray, row: int, col: int, dr: int, dc: int,
                       limit: float = math.inf) -> float:
    """Largest clearance over the free run of cells through (row, col) perpendicular to
    the step (dr, dc). Stops early once ``limit`` is reached."""
    best = float(dist[row, col])
    if best <= 0.0:
        return 0.0
    H, W = dist.shape
    for pr, pc in ((-dc, dr), (dc, -dr)):
        r, c = row + pr, col + pc
        while best < limit and 0 <= r < H and 0 <= c < W:
            v = float(dist[r, c])
            if v <= 0.0:
                break
            if v > best:
                best = v
            r += pr
            c += pc
    return best


@dataclass(frozen=True)
class SegmentFit:
    orientation: str
    clearance: float


def orientation_fit(grid: OccupancyGrid, path: Path, robot: RobotDescriptor,
                    carried: Sequence[float], carry_pose: str = "NV-2",
                    dist: np.ndarray | None = None, reach: float = 0.0) -> list[SegmentFit]:
    """Carry orientation for each step between consecutive path cells.

    A step is horizontal when the corridor clearance at both of its cells covers
    the horizontal swept half-width, else sideways when that fits. Sideways is
    then held for every step within ``reach`` (along the path) of a step that
    needs it, so an element sticking out ahead of the grip is already turned
    when it enters a narrow passage and stays turned until it has left.

    A single-cell path yields one entry judged on the cell's own clearance.
    Raises :class:`OrientationError` naming the first segment nothing fits through.
    """
    if dist is None:
        dist = clearance_map(grid)
    lateral = pose_lookup(robot, carry_pose).lateral_extent
    need_h = max(lateral, carried[0] / 2.0)
    need_s = max(lateral, carried[1] / 2.0)
    cells = path.cells
    if len(cells) == 1:
        r, c = cells[0]
        clear = [float(dist[r, c])]
        cell_of_min = [cells[0]]
        mid = [0.0]
    else:
        clear, cell_of_min, mid = [], [], []
        s = 0.0
        for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
            dr, dc = r1 - r0, c1 - c0
            a = corridor_clearance(dist, r0, c0, dr, dc, need_h)
            b = corridor_clearance(dist, r1, c1, dr, dc, need_h)
            clear.append(min(a, b))
            cell_of_min.append((r0, c0) if a <= b else (r1, c1))
            step = (SQRT2 if dr and dc else 1.0) * grid.resolution
            mid.append(s + step / 2.0)
            s += step
    orient = []
    for i, cl in enumerate(clear):
        if cl >= need_h:
            orient.append(HORIZONTAL)
        elif cl >= need_s:
            orient.append(SIDEWAYS)
        else:
            raise OrientationError(i, cell_of_min[i], cl, need_s)
    if reach > 0.0:
        narrow = [mid[i] for i, o in enumerate(orient) if o == SIDEWAYS]
        for i in range(len(orient)):
            k = bisect.bisect_left(narrow, mid[i] - reach)
            if k < len(narrow) and narrow[k] <= mid[i] + reach:
                orient[i] = SIDEWAYS
    return [SegmentFit(o, cl) for o, cl in zip(orient, clear)]
