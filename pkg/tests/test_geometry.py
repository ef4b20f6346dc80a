import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bimrobo.geometry import (Pose, convex_hull, matrix_to_rpy, normalize_angle, point_in_convex,
                              polygon_area, rpy_to_matrix)
from oracles import hull_area

coord = st.floats(-50, 50, allow_nan=False)
angle = st.floats(-math.pi, math.pi, allow_nan=False)
poses = st.builds(Pose, coord, coord, coord, angle, st.floats(-1.4, 1.4), angle)


def _mat(p: Pose) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = np.array(p.rotation())
    m[:3, 3] = (p.x, p.y, p.z)
    return m


def test_rotation_order_is_z_then_y_then_x():
    r, p, y = 0.3, -0.2, 1.1
    rx = np.array([[1, 0, 0], [0, math.cos(r), -math.sin(r)], [0, math.sin(r), math.cos(r)]])
    ry = np.array([[math.cos(p), 0, math.sin(p)], [0, 1, 0], [-math.sin(p), 0, math.cos(p)]])
    rz = np.array([[math.cos(y), -math.sin(y), 0], [math.sin(y), math.cos(y), 0], [0, 0, 1]])
    assert np.allclose(np.array(rpy_to_matrix(r, p, y)), rz @ ry @ rx)


def test_normalize_angle_range():
    assert normalize_angle(math.pi) == pytest.approx(math.pi)
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert math.copysign(1.0, normalize_angle(-0.0)) == 1.0


def test_pose_rejects_non_finite():
    with pytest.raises(ValueError):
        Pose(math.nan)
    with pytest.raises(ValueError):
        Pose.from_seq([1, 2, 3, 4])


def test_from_seq_lengths():
    assert Pose.from_seq([1, 2]) == Pose(1, 2)
    assert Pose.from_seq([1, 2, 3]).z == 3
    assert Pose.from_seq([1, 2, 3, 0, 0, 1]).yaw == 1


@given(poses, poses)
def test_compose_matches_homogeneous_matrices(a, b):
    assert np.allclose(_mat(a.compose(b)), _mat(a) @ _mat(b), atol=1e-9)


@given(poses)
def test_inverse_composes_to_identity(p):
    assert np.allclose(_mat(p.compose(p.inverse())), np.eye(4), atol=1e-9)


@given(poses, st.tuples(coord, coord, coord))
def test_transform_point_matches_matrix(p, q):
    want = _mat(p) @ np.array([*q, 1.0])
    assert np.allclose(p.transform_point(q), want[:3], atol=1e-9)


@given(angle, st.floats(-1.5, 1.5), angle)
def test_rpy_round_trip(r, p, y):
    m = rpy_to_matrix(r, p, y)
    assert np.allclose(np.array(rpy_to_matrix(*matrix_to_rpy(m))), np.array(m), atol=1e-9)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=0, max_size=30))
def test_convex_hull_area_matches_scipy(pts):
    hull = convex_hull(pts)
    assert polygon_area(hull) >= -1e-12  # counter-clockwise
    assert polygon_area(hull) == pytest.approx(hull_area(pts), abs=1e-7)
    for p in pts:
        if len(hull) >= 3:
            assert point_in_convex(hull, p, eps=1e-7)


def test_hull_degenerate_inputs():
    assert convex_hull([]) == []
    assert convex_hull([(1, 1), (1, 1)]) == [(1.0, 1.0)]
    assert len(convex_hull([(0, 0), (1, 1), (2, 2)])) == 2
