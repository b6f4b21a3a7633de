"""Rule-based camera-to-BEV view transform (lift, then splat)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraModel, GridConfig, unproject
from .pillars import ConfigurationError


def default_depth_bins(start: float = 1.0, stop: float = 60.0, step: float = 1.0) -> np.ndarray:
    count = int(round((stop - start) / step)) + 1
    return start + step * np.arange(count)


@dataclass(frozen=True)
class ImageFeatureMap:
    features: np.ndarray  # [C, H', W']
    stride: int = 1

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 3:
            raise ConfigurationError(f"image features must be [C, H, W], got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValueError("image features must be finite")
        object.__setattr__(self, "features", feats)

    @property
    def shape(self) -> tuple:
        return self.features.shape


@dataclass(frozen=True)
class DepthDistribution:
    probs: np.ndarray  # [D, H', W']
    bin_depths: np.ndarray  # [D]

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        bins = np.asarray(self.bin_depths, dtype=np.float64).reshape(-1)
        if probs.ndim != 3 or probs.shape[0] != bins.shape[0]:
            raise ConfigurationError(
                f"depth probs {probs.shape} inconsistent with {bins.shape[0]} bins"
            )
        if (probs < 0).any():
            raise ValueError("depth probabilities must be non-negative")
        if bins.shape[0] > 1 and not np.all(np.diff(bins) > 0):
            raise ValueError("depth bins must be strictly increasing")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "bin_depths", bins)

    def is_normalized(self, tol: float = 1e-5) -> bool:
        return bool(np.all(np.abs(self.probs.sum(axis=0) - 1.0) <= tol))


@dataclass(frozen=True)
class BevFeatureMap:
    channels: np.ndarray  # [C, rows, cols]
    grid: GridConfig

    def __post_init__(self):
        arr = np.asarray(self.channels)
        if arr.ndim != 3 or arr.shape[1:] != self.grid.shape:
            raise ConfigurationError(
                f"BEV array {arr.shape} does not match grid {self.grid.shape}"
            )
        object.__setattr__(self, "channels", arr)

    @property
    def num_channels(self) -> int:
        return self.channels.shape[0]


@dataclass(frozen=True)
class PseudoPoints:
    """Lifted frustum points: ``xyz`` is ``[N, 3]`` ego frame, ``features`` is ``[N, C]``."""

    xyz: np.ndarray
    features: np.ndarray

    def __len__(self) -> int:
        return self.xyz.shape[0]


def lift(features: ImageFeatureMap, depth: DepthDistribution, camera: CameraModel) -> PseudoPoints:
    """Expand every feature pixel along its depth bins into weighted 3D points.

    Ordering is pixel-row-major, then column, then depth bin. Pixel ``(row,
    col)`` is unprojected at its center ``((col + 0.5) * stride, (row + 0.5)
    * stride)``.
    """
    n_ch, height, width = features.shape
    n_bins = depth.probs.shape[0]
    if depth.probs.shape[1:] != (height, width):
        raise ConfigurationError(
            f"depth map {depth.probs.shape[1:]} does not match feature map {(height, width)}"
        )
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    pix = np.column_stack([(cols.ravel() + 0.5), (rows.ravel() + 0.5)]) * features.stride
    pix = np.repeat(pix, n_bins, axis=0)
    depths = np.tile(depth.bin_depths, height * width)
    xyz = unproject(camera, pix, depths)

    probs = depth.probs.reshape(n_bins, -1).T  # [H*W, D]
    feats = features.features.reshape(n_ch, -1).T  # [H*W, C]
    weighted = probs[:, :, None] * feats[:, None, :]
    return PseudoPoints(xyz, weighted.reshape(-1, n_ch))


def splat(points: PseudoPoints, grid: GridConfig, channels: int | None = None) -> BevFeatureMap:
    """Sum-pool pseudo point features into BEV cells in input order; z is ignored."""
    if channels is None:
        channels = points.features.shape[1]
    bev = np.zeros((grid.rows * grid.cols, channels))
    if len(points):
        rows, cols, inside = grid.cell_indices(points.xyz[:, 0], points.xyz[:, 1])
        linear = rows[inside] * grid.cols + cols[inside]
        # np.add.at is unbuffered and walks indices in order
        np.add.at(bev, linear, points.features[inside])
    return BevFeatureMap(bev.T.reshape(channels, grid.rows, grid.cols), grid)
