"""Grid path planning: obstacle inflation and 8-connected A*."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from .. import _kernels
from ..geometry import Point2, Pose
from ..worldgen import FREE, OccupancyGrid

SQRT2 = 1.4142135623730951


class PlanningError(Exception):
    """Navigation query that cannot be answered; ``cause`` is a short machine tag."""

    def __init__(self, cause: str, message: str):
        super().__init__(message)
        self.cause = cause


@dataclass(frozen=True)
class Path:
    start: Pose
    goal: Pose
    cells: tuple[tuple[int, int], ...]
    waypoints: tuple[Point2, ...]
    resolution: float
    n_axial: int
    n_diag: int

    @property
    def length(self) -> float:
        """Grid cost in meters: axial steps cost 1, diagonal steps sqrt(2), times resolution."""
        return (self.n_axial + self.n_diag * SQRT2) * self.resolution

    def polyline(self) -> list[Point2]:
        """Exact start, the cell centres, exact goal."""
        return [self.start.xy, *self.waypoints, self.goal.xy]


def inflate(grid: OccupancyGrid, radius: float) -> np.ndarray:
    """Blocked mask (uint8) for a disc robot of ``radius``.

    A cell is blocked when it is not free or its centre lies within
    ``radius + res*sqrt(2)`` of an occupied or unknown cell centre. The extra
    diagonal keeps a disc moving between free cell centres (or anywhere inside
    a free cell) clear of every non-free cell square.
    """
    occ = grid.cells != FREE
    if not occ.any():
        return np.zeros(grid.cells.shape, dtype=np.uint8)
    dist = distance_transform_edt(~occ, sampling=grid.resolution)
    blocked = occ | (dist <= radius + grid.resolution * SQRT2)
    return np.ascontiguousarray(blocked, dtype=np.uint8)


def _count_steps(cells) -> tuple[int, int]:
    axial = diag = 0
    for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
        if r0 != r1 and c0 != c1:
            diag += 1
        else:
            axial += 1
    return axial, diag


def plan_path(grid: OccupancyGrid, start: Pose, goal: Pose, inflation_radius: float,
              blocked: np.ndarray | None = None) -> Path:
    """Minimal-cost 8-connected path between the cells holding ``start`` and ``goal``.

    Ties break on (f, h, row, col). ``blocked`` may be passed to reuse an
    inflated mask computed with :func:`inflate`.
    """
    if blocked is None:
        blocked = inflate(grid, inflation_radius)
    sr, sc = grid.cell_of(start.x, start.y)
    gr, gc = grid.cell_of(goal.x, goal.y)
    if not grid.in_bounds(sr, sc):
        raise PlanningError("out_of_map", f"start {start.xy} lies outside the map")
    if not grid.in_bounds(gr, gc):
        raise PlanningError("out_of_map", f"goal {goal.xy} lies outside the map")
    if blocked[sr, sc]:
        raise PlanningError("start_blocked", f"start {start.xy} is inside an inflated obstacle")
    if blocked[gr, gc]:
        raise PlanningError("goal_blocked", f"goal {goal.xy} is inside an inflated obstacle")
    cells = _kernels.astar(blocked, sr, sc, gr, gc)
    if cells is None:
        raise PlanningError("no_path", f"no path from {start.xy} to {goal.xy}")
    cells = tuple((int(r), int(c)) for r, c in cells)
    axial, diag = _count_steps(cells)
    waypoints = tuple(grid.cell_center(r, c) for r, c in cells)
    return Path(start, goal, cells, waypoints, grid.resolution, axial, diag)


def segment_length(a: Point2, b: Point2) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])
