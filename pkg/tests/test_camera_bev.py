import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcbev.camera_bev import (
    DepthDistribution,
    ImageFeatureMap,
    PseudoPoints,
    default_depth_bins,
    lift,
    splat,
)
from rcbev.geometry import CameraModel, GridConfig, Pose, project_to_image
from rcbev.pillars import ConfigurationError
from rcbev.synthetic import EGO_TO_CAMERA_AXES, front_camera

GRID = GridConfig()


def one_pixel_camera(focal=100.0):
    """2x2 image whose single stride-2 feature pixel sits on the principal point."""
    k = np.array([[focal, 0, 1.0], [0, focal, 1.0], [0, 0, 1]])
    return CameraModel(k, Pose(EGO_TO_CAMERA_AXES, np.zeros(3)), 2, 2)


def test_default_bins():
    bins = default_depth_bins()
    assert bins[0] == 1 and bins[-1] == 60 and len(bins) == 60


class TestLift:
    def test_principal_point_unprojection(self):
        feats = ImageFeatureMap(np.ones((1, 1, 1)), stride=2)
        depth = DepthDistribution(np.ones((1, 1, 1)), [10.0])
        pts = lift(feats, depth, one_pixel_camera())
        # (0, 0, 10) in camera axes is 10 m straight ahead in the ego frame
        assert np.allclose(pts.xyz, [[10, 0, 0]], atol=1e-12)

    def test_one_hot(self):
        c = np.array([2.0, -1.0, 0.5])
        feats = ImageFeatureMap(c.reshape(3, 1, 1), stride=2)
        probs = np.zeros((4, 1, 1))
        probs[2] = 1
        pts = lift(feats, DepthDistribution(probs, [5.0, 10.0, 15.0, 20.0]), one_pixel_camera())
        nonzero = np.flatnonzero(np.abs(pts.features).sum(axis=1))
        assert nonzero.tolist() == [2]
        assert np.array_equal(pts.features[2], c)
        assert np.allclose(pts.xyz[2], [15, 0, 0])

    def test_uniform(self):
        c = np.array([3.0, 6.0])
        feats = ImageFeatureMap(c.reshape(2, 1, 1), stride=2)
        pts = lift(feats, DepthDistribution(np.full((3, 1, 1), 1 / 3), [5.0, 10.0, 15.0]), one_pixel_camera())
        assert len(pts) == 3
        assert np.allclose(pts.features, c / 3)
        assert np.allclose(pts.features.sum(axis=0), c)

    def test_order_and_pixel_centers(self):
        cam = front_camera()
        feats = ImageFeatureMap(np.zeros((1, 2, 3)), stride=16)
        depth = DepthDistribution(np.full((2, 2, 3), 0.5), [10.0, 20.0])
        pts = lift(feats, depth, cam)
        assert len(pts) == 12
        # third point is pixel (row 0, col 1), first bin: u = 24, v = 8
        uvd = project_to_image(cam, pts.xyz)
        assert np.allclose(uvd[2, :3], [24, 8, 10])
        assert np.allclose(uvd[1, :3], [8, 8, 20])

    def test_shape_mismatch(self):
        feats = ImageFeatureMap(np.zeros((1, 2, 2)))
        with pytest.raises(ConfigurationError):
            lift(feats, DepthDistribution(np.ones((1, 3, 2)), [1.0]), front_camera())
        with pytest.raises(ConfigurationError):
            DepthDistribution(np.ones((2, 2, 2)), [1.0])

    def test_distribution_validation(self):
        with pytest.raises(ValueError):
            DepthDistribution(-np.ones((1, 1, 1)), [1.0])
        with pytest.raises(ValueError):
            DepthDistribution(np.ones((2, 1, 1)) / 2, [2.0, 1.0])
        assert DepthDistribution(np.ones((2, 1, 1)) / 2, [1.0, 2.0]).is_normalized()


class TestSplat:
    def test_single_point(self):
        bev = splat(PseudoPoints(np.array([[0.05, 0.05, 1.0]]), np.array([[1.5, -2.0]])), GRID)
        assert bev.channels.shape == (2, 512, 512)
        assert bev.channels[:, 0, 256].tolist() == [1.5, -2.0]
        assert np.count_nonzero(bev.channels) == 2

    def test_same_cell_sums(self):
        pts = PseudoPoints(np.array([[10.01, 0.01, 0], [10.09, 0.09, 5]]), np.array([[1.0], [2.0]]))
        bev = splat(pts, GRID)
        assert bev.channels[0, 100, 256] == 3.0 and bev.channels.sum() == 3.0

    def test_out_of_grid_dropped(self):
        pts = PseudoPoints(np.array([[-0.01, 0, 0], [51.2, 0, 0], [1, 25.6, 0]]), np.ones((3, 4)))
        assert not splat(pts, GRID).channels.any()

    def test_empty(self):
        bev = splat(PseudoPoints(np.zeros((0, 3)), np.zeros((0, 5))), GRID)
        assert bev.num_channels == 5 and not bev.channels.any()


def random_case(rng, channels=4, height=6, width=10, bins=8):
    feats = ImageFeatureMap(rng.uniform(-1, 2, (channels, height, width)), stride=32)
    logits = rng.normal(size=(bins, height, width))
    probs = np.exp(logits) / np.exp(logits).sum(axis=0)
    depth = DepthDistribution(probs, np.sort(rng.uniform(2, 30, bins)) + np.arange(bins) * 1e-3)
    return feats, depth


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mass_conservation(seed):
    rng = np.random.default_rng(seed)
    feats, depth = random_case(rng)
    # the front camera's half FoV is atan(0.8), so depths below 32 m stay within y = ±25.6
    pts = lift(feats, depth, front_camera())
    assert GRID.cell_indices(pts.xyz[:, 0], pts.xyz[:, 1])[2].all()
    bev = splat(pts, GRID)
    total_bev = bev.channels.sum(axis=(1, 2))
    total_img = feats.features.sum(axis=(1, 2))
    assert np.allclose(total_bev, total_img, rtol=1e-4, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    f1, depth = random_case(rng)
    f2 = ImageFeatureMap(rng.normal(size=f1.shape), stride=f1.stride)
    cam = front_camera()
    combo = ImageFeatureMap(a * f1.features + b * f2.features, stride=f1.stride)
    lhs = splat(lift(combo, depth, cam), GRID).channels
    rhs = a * splat(lift(f1, depth, cam), GRID).channels + b * splat(lift(f2, depth, cam), GRID).channels
    assert np.allclose(lhs, rhs, atol=1e-9)
