import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcbev.geometry import Box3D, CameraModel, Pose
from rcbev.iou import (
    clip_convex,
    image_rectangle,
    iou_2d_image,
    iou_3d,
    iou_bev,
    polygon_area,
    rect_iou,
)
from rcbev.synthetic import front_camera

from oracles import monte_carlo_iou_bev


def box(x=0.0, y=0.0, z=0.0, l=1.0, w=1.0, h=1.0, yaw=0.0):
    return Box3D((x, y, z), (l, w, h), yaw)


box_st = st.builds(
    box,
    x=st.floats(-5, 5), y=st.floats(-5, 5), z=st.floats(-1, 1),
    l=st.floats(0.2, 6), w=st.floats(0.2, 6), h=st.floats(0.2, 3),
    yaw=st.floats(-math.pi, math.pi),
)


class TestPolygons:
    def test_area(self):
        assert polygon_area(np.array([[0, 0], [2, 0], [2, 1], [0, 1]], float)) == 2.0
        assert polygon_area(np.zeros((2, 2))) == 0.0

    def test_clip_nested(self):
        outer = np.array([[0, 0], [4, 0], [4, 4], [0, 4]], float)
        inner = np.array([[1, 1], [2, 1], [2, 2], [1, 2]], float)
        assert polygon_area(clip_convex(inner, outer)) == pytest.approx(1.0)
        assert polygon_area(clip_convex(outer, inner)) == pytest.approx(1.0)


class TestIoUBev:
    def test_identical(self):
        assert iou_bev(box(yaw=0.4), box(yaw=0.4)) == pytest.approx(1.0)

    def test_disjoint(self):
        assert iou_bev(box(), box(x=5)) == 0.0

    def test_offset_squares(self):
        assert iou_bev(box(), box(x=0.5)) == pytest.approx(1 / 3, abs=1e-12)

    def test_touching_edges(self):
        assert iou_bev(box(), box(x=1.0)) == pytest.approx(0.0, abs=1e-12)

    def test_rotated_square_inside(self):
        # a unit square rotated 45 degrees inside a 2x2 square
        assert iou_bev(box(yaw=math.pi / 4), box(l=2, w=2)) == pytest.approx(0.25)

    def test_cross(self):
        # 4x1 and 1x4 crossing at the center: inter 1, union 7
        assert iou_bev(box(l=4), box(l=4, yaw=math.pi / 2)) == pytest.approx(1 / 7)

    def test_degenerate(self):
        flat = Box3D((0, 0, 0), (1e-7, 1e-7, 1), 0.0)
        assert iou_bev(flat, flat) == 0.0

    @settings(max_examples=200, deadline=None)
    @given(box_st, box_st)
    def test_symmetric_and_bounded(self, a, b):
        ab, ba = iou_bev(a, b), iou_bev(b, a)
        assert 0.0 <= ab <= 1.0
        assert ab == pytest.approx(ba, abs=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(box_st, box_st, st.floats(-20, 20), st.floats(-20, 20), st.floats(-math.pi, math.pi))
    def test_rigid_invariance(self, a, b, tx, ty, theta):
        pose = Pose.from_yaw(theta, (tx, ty, 0))

        def move(bx):
            c = pose.apply(np.array([bx.center]))[0]
            return Box3D(c, bx.size, bx.yaw + theta)

        assert iou_bev(move(a), move(b)) == pytest.approx(iou_bev(a, b), abs=1e-9)

    def test_monte_carlo_sample(self):
        rng = np.random.default_rng(123)
        for _ in range(20):
            a = box(*rng.uniform(-1, 1, 2), 0, *rng.uniform(0.5, 4, 2), 1, rng.uniform(-math.pi, math.pi))
            b = box(*rng.uniform(-1, 1, 2), 0, *rng.uniform(0.5, 4, 2), 1, rng.uniform(-math.pi, math.pi))
            assert iou_bev(a, b) == pytest.approx(monte_carlo_iou_bev(a, b, 200_000, rng), abs=0.01)


class TestIoU3D:
    def test_identical(self):
        assert iou_3d(box(), box()) == pytest.approx(1.0)

    def test_disjoint_in_z(self):
        assert iou_3d(box(), box(z=2)) == 0.0

    def test_half_height(self):
        assert iou_3d(box(h=2), box(z=1, h=2)) == pytest.approx(1 / 3)

    @settings(max_examples=100, deadline=None)
    @given(box_st, box_st)
    def test_not_above_bev(self, a, b):
        # with equal heights and centers the 3D ratio equals the BEV ratio
        b_same_z = Box3D((b.center[0], b.center[1], a.center[2]), (b.length, b.width, a.height), b.yaw)
        assert iou_3d(a, b_same_z) == pytest.approx(iou_bev(a, b_same_z), abs=1e-9)
        assert 0.0 <= iou_3d(a, b) <= 1.0


class TestIoU2D:
    def test_rect(self):
        assert rect_iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(1 / 3)
        assert rect_iou((0, 0, 1, 1), (2, 2, 3, 3)) == 0.0

    def test_identical(self):
        cam = front_camera()
        b = Box3D((15, 1, 0.8), (4, 2, 1.6), 0.3)
        assert iou_2d_image(b, b, cam) == pytest.approx(1.0)

    def test_disjoint_projection(self):
        cam = front_camera()
        a = Box3D((15, 6, 0.8), (2, 1, 1.6), 0.0)
        b = Box3D((15, -6, 0.8), (2, 1, 1.6), 0.0)
        assert iou_2d_image(a, b, cam) == 0.0

    def test_behind_camera(self):
        cam = front_camera()
        behind = Box3D((-10, 0, 0.8), (4, 2, 1.6), 0.0)
        assert image_rectangle(behind, cam) is None
        assert iou_2d_image(behind, behind, cam) == 0.0

    def test_rectangle_matches_projection(self):
        # axis camera: ego frame == camera frame, box faces straight at it
        k = np.array([[100.0, 0, 50], [0, 100.0, 50], [0, 0, 1]])
        cam = CameraModel(k, Pose(), 100, 100)
        b = Box3D((0, 0, 10), (0.2, 0.2, 0.2), 0.0)
        x0, y0, x1, y1 = image_rectangle(b, cam)
        # nearest face at z = 9.9 spans +-0.1 m -> +-100*0.1/9.9 px
        half = 100 * 0.1 / 9.9
        assert (x0, y0, x1, y1) == pytest.approx((50 - half, 50 - half, 50 + half, 50 + half))
