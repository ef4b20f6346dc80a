import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bimrobo.geometry import Pose
from bimrobo.sim.planner import PlanningError, inflate, plan_path
from bimrobo.worldgen import FREE, OCCUPIED, UNKNOWN, OccupancyGrid
from oracles import Cost, brute_inflate, dijkstra_cost, path_cost


def _grid(cells, res=0.1):
    return OccupancyGrid(res, Pose(), np.asarray(cells, dtype=np.int8))


def _centre(grid, r, c):
    x, y = grid.cell_center(r, c)
    return Pose(x, y)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_path_cost_matches_dijkstra(seed):
    rng = np.random.default_rng(seed)
    h, w = (int(v) for v in rng.integers(2, 30, size=2))
    occ = rng.random((h, w)) < rng.uniform(0, 0.4)
    grid = _grid(np.where(occ, OCCUPIED, FREE))
    s = tuple(int(v) for v in (rng.integers(h), rng.integers(w)))
    g = tuple(int(v) for v in (rng.integers(h), rng.integers(w)))
    blocked = occ.astype(np.uint8)
    want = dijkstra_cost(occ, s, g)
    try:
        path = plan_path(grid, _centre(grid, *s), _centre(grid, *g), 0.0, blocked=blocked)
    except PlanningError:
        assert want is None
        return
    assert want is not None
    assert path.cells[0] == s and path.cells[-1] == g
    assert not any(occ[c] for c in path.cells)
    assert path_cost(list(path.cells)) == want == Cost(path.n_axial, path.n_diag)


def test_error_causes():
    cells = np.zeros((5, 5), dtype=np.int8)
    cells[:, 2] = OCCUPIED
    grid = _grid(cells, 1.0)
    blocked = (cells != FREE).astype(np.uint8)
    with pytest.raises(PlanningError) as e:
        plan_path(grid, Pose(0.5, 0.5), Pose(4.5, 0.5), 0.0, blocked=blocked)
    assert e.value.cause == "no_path"
    with pytest.raises(PlanningError) as e:
        plan_path(grid, Pose(2.5, 0.5), Pose(4.5, 0.5), 0.0, blocked=blocked)
    assert e.value.cause == "start_blocked"
    with pytest.raises(PlanningError) as e:
        plan_path(grid, Pose(0.5, 0.5), Pose(2.5, 4.5), 0.0, blocked=blocked)
    assert e.value.cause == "goal_blocked"
    with pytest.raises(PlanningError) as e:
        plan_path(grid, Pose(-3, 0.5), Pose(0.5, 0.5), 0.0, blocked=blocked)
    assert e.value.cause == "out_of_map"


def test_diagonal_corner_cutting_is_allowed():
    cells = np.array([[FREE, OCCUPIED], [OCCUPIED, FREE]], dtype=np.int8)
    grid = _grid(cells, 1.0)
    p = plan_path(grid, Pose(0.5, 0.5), Pose(1.5, 1.5), 0.0, blocked=(cells != FREE).astype(np.uint8))
    assert (p.n_axial, p.n_diag) == (0, 1)
    assert p.length == pytest.approx(np.sqrt(2))
    assert p.polyline()[0] == (0.5, 0.5)


def test_unknown_cells_are_obstacles():
    cells = np.zeros((3, 3), dtype=np.int8)
    cells[1, 1] = UNKNOWN
    assert inflate(_grid(cells), 0.0)[1, 1] == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.6))
def test_inflation_matches_brute_force(seed, radius):
    rng = np.random.default_rng(seed)
    res = 0.1
    free = rng.random((20, 20)) > 0.08
    grid = _grid(np.where(free, FREE, OCCUPIED), res)
    want = brute_inflate(free, res, radius + res * np.sqrt(2))
    got = inflate(grid, radius).astype(bool)
    if free.all():
        assert not got.any()
        return
    # skip cells whose distance sits within rounding of the threshold
    rr, cc = np.nonzero(~free)
    ys, xs = np.mgrid[0:20, 0:20]
    d = np.min(np.hypot(ys[..., None] - rr, xs[..., None] - cc), axis=-1) * res
    near = np.abs(d - (radius + res * np.sqrt(2))) < 1e-9
    assert np.array_equal(got[~near], want[~near])


def test_inflated_path_keeps_disc_clear():
    cells = np.zeros((30, 30), dtype=np.int8)
    cells[10:20, 14:16] = OCCUPIED
    grid = _grid(cells, 0.1)
    p = plan_path(grid, Pose(0.5, 1.5), Pose(2.5, 1.5), 0.3)
    occ_r, occ_c = np.nonzero(cells)
    for x, y in p.waypoints:
        dx = np.maximum(np.maximum(occ_c * 0.1 - x, 0), x - (occ_c + 1) * 0.1)
        dy = np.maximum(np.maximum(occ_r * 0.1 - y, 0), y - (occ_r + 1) * 0.1)
        assert np.min(np.hypot(dx, dy)) >= 0.3
