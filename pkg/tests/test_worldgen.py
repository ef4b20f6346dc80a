import hashlib
import os
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bimrobo.geometry import Pose
from bimrobo.kb import load_kb
from bimrobo.model import Project, element_world_vertices, load_project
from bimrobo.worldgen import (FREE, OCCUPIED, UNKNOWN, OccupancyGrid, SDFValidationError,
                              build_occupancy_grid, build_world, emit_sdf, partition_elements,
                              read_map_pgm, unresolved_world_bindings, validate_sdf, write_map_pgm)
from helpers import scenario_dir
from oracles import prism_footprint, supersample_raster

AUG = os.path.join(scenario_dir("two_bedroom"), "project.yaml")


@pytest.fixture(scope="module")
def project():
    return load_project(AUG)


@pytest.fixture(scope="module")
def world(project):
    return build_world(project)


def test_partition(project):
    part = partition_elements(project)
    assert sorted(e.id for e in part.scheduled) == sorted(f"frame_{i}" for i in range(11))
    pre = {e.id for e in part.preexisting}
    assert {"floor", "roof", "wall_n"} <= pre
    assert {"storage_outdoor", "site_office", "pickup_outdoor"} <= {e.id for e in part.site_objects}
    ids = part.all_ids()
    assert len(ids) == len(set(ids)) == len(project.elements)
    assert set(part.install_targets) == {e.id for e in part.scheduled}


def test_all_finished_means_nothing_scheduled(project):
    from dataclasses import replace
    import datetime as dt
    later = replace(project, simulation_start_date=dt.date(2023, 1, 1))
    assert partition_elements(later).scheduled == ()


def test_named_poses_resolve_every_binding(world):
    assert unresolved_world_bindings(world, load_kb()) == []
    assert world.robot_initial_pose == Pose(15.0, -1.0)


def test_unaugmented_world_reports_missing_storage():
    p = load_project(os.path.join(scenario_dir("two_bedroom_unaugmented"), "project.yaml"))
    assert unresolved_world_bindings(build_world(p), load_kb()) == ["storage:frame_material_storage"]


def test_raster_matches_supersampled_oracle(world):
    g = world.grid
    polys = []
    for el in world.partition.static_elements:
        fp = prism_footprint(element_world_vertices(el), world.z_band)
        if fp is not None:
            polys.append(fp)
    oracle = supersample_raster(polys, g.cells.shape, g.origin.x, g.origin.y, g.resolution)
    ours = g.cells == OCCUPIED
    assert abs(int(ours.sum()) - int(oracle.sum())) <= 0.02 * oracle.sum()
    # every oracle hit is a positive-area overlap, so it must be marked
    assert not np.any(oracle & ~ours)


def test_grid_covers_named_poses_and_targets(world):
    g = world.grid
    for p in list(world.named_poses.values()) + list(world.install_targets.values()):
        assert g.in_bounds(*g.cell_of(p.x, p.y))


def test_grid_origin_is_snapped(world):
    g = world.grid
    for v in (g.origin.x, g.origin.y):
        assert abs(v / g.resolution - round(v / g.resolution)) < 1e-6


def test_degenerate_world_gives_single_free_cell():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        g = build_occupancy_grid(partition_elements(Project()))
    assert g.cells.shape == (1, 1) and g.cells[0, 0] == FREE
    assert w


def test_grid_validation():
    with pytest.raises(ValueError):
        OccupancyGrid(0.0, Pose(), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        OccupancyGrid(0.1, Pose(), np.full((2, 2), 7))
    g = OccupancyGrid(0.1, Pose(), np.zeros((2, 3)))
    assert (g.height, g.width) == (2, 3)
    with pytest.raises(ValueError):
        g.cells[0, 0] = 1


def _hashes(d):
    out = {}
    for root, _, names in os.walk(d):
        for n in names:
            p = os.path.join(root, n)
            out[os.path.relpath(p, d)] = hashlib.sha256(open(p, "rb").read()).hexdigest()
    return out


def test_emit_sdf_file_set_and_determinism(world, tmp_path):
    files = emit_sdf(world, tmp_path / "a")
    emit_sdf(world, tmp_path / "b")
    sdf = [f for f in files if f.endswith(".sdf")]
    assert len(sdf) == len(world.partition.scheduled) + 1
    assert "world.sdf" in sdf and "frame_0.sdf" in sdf
    assert _hashes(tmp_path / "a") == _hashes(tmp_path / "b")
    kinds = [validate_sdf(tmp_path / "a" / f) for f in sdf]
    assert kinds.count("world") == 1 and kinds.count("model") == len(sdf) - 1


def test_validate_sdf_rejects_bad_files(tmp_path):
    p = tmp_path / "x.sdf"
    p.write_text('<sdf version="1.5"><world name="w"/></sdf>')
    with pytest.raises(SDFValidationError):
        validate_sdf(p)
    p.write_text('<sdf version="1.6"><model name="m"><static>maybe</static></model></sdf>')
    with pytest.raises(SDFValidationError):
        validate_sdf(p)
    p.write_text("<sdf")
    with pytest.raises(SDFValidationError):
        validate_sdf(p)


grids = st.builds(
    lambda cells, res, ox, oy: OccupancyGrid(res, Pose(ox, oy), cells),
    arrays(np.int8, st.tuples(st.integers(1, 30), st.integers(1, 30)),
           elements=st.sampled_from([FREE, OCCUPIED, UNKNOWN])),
    st.sampled_from([0.05, 0.1, 0.25, 1.0]),
    st.floats(-100, 100, allow_nan=False),
    st.floats(-100, 100, allow_nan=False),
)


@settings(max_examples=200, deadline=None)
@given(grids)
def test_pgm_round_trip_is_lossless(tmp_path_factory, grid):
    d = tmp_path_factory.mktemp("pgm")
    write_map_pgm(grid, d / "map.pgm")
    assert read_map_pgm(d / "map.yaml") == grid


def test_pgm_bytes(tmp_path):
    cells = np.array([[FREE, OCCUPIED], [UNKNOWN, FREE]], dtype=np.int8)
    write_map_pgm(OccupancyGrid(0.5, Pose(1, 2), cells), tmp_path / "m.pgm")
    data = (tmp_path / "m.pgm").read_bytes()
    assert data == b"P5\n2 2\n255\n" + bytes([205, 254, 254, 0])
