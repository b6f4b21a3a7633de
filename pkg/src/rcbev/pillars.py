"""Radar sweep accumulation, pillar voxelization and the simplified PointNet.

Radar clouds are carried as ``(N, F)`` float64 arrays. Column layout:

* 3+1D radar: ``x, y, z, rcs, v_r, t``
* 2+1D radar: ``x, y, rcs, v_r, t``

Augmented pillar features append ``x_c, y_c[, z_c], x_p, y_p``, giving
11 values per point for 3+1D input and 9 for 2+1D input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import GridConfig, Pose, transform_points

DEFAULT_MAX_POINTS_PER_PILLAR = 32
DEFAULT_MAX_PILLARS = 8192


class ConfigurationError(ValueError):
    """Raised for inconsistent sizes or capacities."""


def point_columns(has_z: bool) -> tuple:
    return ("x", "y", "z", "rcs", "v_r", "t") if has_z else ("x", "y", "rcs", "v_r", "t")


def feature_columns(has_z: bool) -> tuple:
    if has_z:
        return point_columns(True) + ("x_c", "y_c", "z_c", "x_p", "y_p")
    return point_columns(False) + ("x_c", "y_c", "x_p", "y_p")


@dataclass(frozen=True)
class RadarCloud:
    """A radar point cloud in ego coordinates with per-point time offsets."""

    points: np.ndarray
    has_z: bool = True
    sweeps_used: int = 1

    def __post_init__(self):
        width = len(point_columns(self.has_z))
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, width)
        if not np.all(np.isfinite(pts)):
            raise ValueError("radar points must be finite")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, :2]

    def column(self, name: str) -> np.ndarray:
        return self.points[:, point_columns(self.has_z).index(name)]


@dataclass(frozen=True)
class Sweep:
    """One radar scan: raw ``x, y[, z], rcs, v_r`` rows in that sweep's ego frame."""

    points: np.ndarray
    ego_pose: Pose
    timestamp: float


def accumulate_sweeps(
    sweeps: Sequence[Sweep],
    key_pose: Pose,
    key_time: float,
    num_sweeps: int = 5,
    has_z: bool = True,
) -> RadarCloud:
    """Merge the newest ``num_sweeps`` sweeps into the key ego frame.

    ``sweeps`` must be sorted newest first. Each sweep's points are mapped
    through ``key_pose^-1 ∘ sweep_pose`` and stamped with
    ``t = sweep_time - key_time``. 2+1D points are transformed on the z=0
    plane and the z component is dropped again afterwards. When fewer sweeps
    exist than requested, all of them are used and ``sweeps_used`` reports
    how many.
    """
    if num_sweeps < 1:
        raise ConfigurationError("num_sweeps must be >= 1")
    raw_width = 5 if has_z else 4
    key_inv = key_pose.inverse()
    chunks = []
    used = list(sweeps[:num_sweeps])
    for sweep in used:
        raw = np.asarray(sweep.points, dtype=np.float64).reshape(-1, raw_width)
        if has_z:
            xyz = raw[:, :3]
        else:
            xyz = np.column_stack([raw[:, :2], np.zeros(raw.shape[0])])
        to_key = key_inv.compose(sweep.ego_pose)
        moved = transform_points(to_key, xyz)
        t = np.full(raw.shape[0], sweep.timestamp - key_time)
        spatial = moved if has_z else moved[:, :2]
        chunks.append(np.column_stack([spatial, raw[:, -2:], t]))
    width = len(point_columns(has_z))
    pts = np.vstack(chunks) if chunks else np.zeros((0, width))
    return RadarCloud(pts, has_z=has_z, sweeps_used=len(used))


@dataclass(frozen=True)
class PillarTensor:
    """Dense pillar buffer.

    ``features`` is ``[num_pillars, max_points_per_pillar, feat_dim]`` with
    zero padding; ``coords`` holds the ``(row, col)`` of each pillar and
    ``point_counts`` how many leading slots are occupied.
    """

    features: np.ndarray
    coords: np.ndarray
    point_counts: np.ndarray
    has_z: bool
    points_in_grid: int = 0
    points_outside_grid: int = 0
    points_truncated: int = 0
    pillars_dropped: int = 0

    @property
    def num_pillars(self) -> int:
        return self.features.shape[0]

    @property
    def feat_dim(self) -> int:
        return self.features.shape[2]

    def occupancy_mask(self) -> np.ndarray:
        slots = np.arange(self.features.shape[1])
        return slots[None, :] < self.point_counts[:, None]


def pillarize(
    cloud: RadarCloud,
    grid: GridConfig,
    max_points_per_pillar: int = DEFAULT_MAX_POINTS_PER_PILLAR,
    max_pillars: int = DEFAULT_MAX_PILLARS,
    seed: int = 0,
) -> PillarTensor:
    """Bin a radar cloud into pillars and build augmented per-point features.

    Points outside the grid are discarded. Pillars with more than
    ``max_points_per_pillar`` points and frames with more than ``max_pillars``
    pillars are reduced by seeded uniform subsampling; the pillar-mean
    offsets are computed on the points that survive. Kept points retain
    their input order within a pillar and pillars are ordered by
    ``(row, col)``.
    """
    if max_points_per_pillar <= 0 or max_pillars <= 0:
        raise ConfigurationError("pillar capacities must be positive")
    has_z = cloud.has_z
    feat_dim = len(feature_columns(has_z))
    pts = cloud.points
    rows, cols, inside = grid.cell_indices(pts[:, 0], pts[:, 1])
    n_outside = int((~inside).sum())
    pts, rows, cols = pts[inside], rows[inside], cols[inside]
    n_inside = pts.shape[0]

    rng = np.random.default_rng(seed)
    point_keys = rng.random(n_inside)

    linear = rows * grid.cols + cols
    cells, inverse = np.unique(linear, return_inverse=True)
    inverse = inverse.reshape(-1)
    n_cells = cells.shape[0]

    pillar_keep = np.arange(n_cells)
    if n_cells > max_pillars:
        pillar_keep = np.sort(rng.choice(n_cells, size=max_pillars, replace=False))
    pillars_dropped = n_cells - pillar_keep.shape[0]

    remap = np.full(n_cells, -1, dtype=np.int64)
    remap[pillar_keep] = np.arange(pillar_keep.shape[0])
    pillar_of_point = remap[inverse]
    alive = pillar_of_point >= 0

    # rank points inside each pillar by their random key; keep the lowest ranks
    order = np.lexsort((point_keys, pillar_of_point))
    sorted_pillar = pillar_of_point[order]
    starts = np.searchsorted(sorted_pillar, sorted_pillar, side="left")
    rank = np.empty(n_inside, dtype=np.int64)
    rank[order] = np.arange(n_inside) - starts
    keep = alive & (rank < max_points_per_pillar)

    kept_idx = np.flatnonzero(keep)
    kept_pillar = pillar_of_point[kept_idx]
    # stable sort by pillar preserves input order within each pillar
    by_pillar = kept_idx[np.argsort(kept_pillar, kind="stable")]
    kept_pillar = pillar_of_point[by_pillar]
    kept_pts = pts[by_pillar]

    n_pillars = pillar_keep.shape[0]
    counts = np.bincount(kept_pillar, minlength=n_pillars)
    slot_start = np.concatenate([[0], np.cumsum(counts)[:-1]])
    slot = np.arange(kept_pillar.shape[0]) - slot_start[kept_pillar]

    n_spatial = 3 if has_z else 2
    sums = np.zeros((n_pillars, n_spatial))
    np.add.at(sums, kept_pillar, kept_pts[:, :n_spatial])
    means = sums / np.maximum(counts, 1)[:, None]
    centered = kept_pts[:, :n_spatial] - means[kept_pillar]

    p_rows = cells[pillar_keep] // grid.cols
    p_cols = cells[pillar_keep] % grid.cols
    cx, cy = grid.cell_center(p_rows, p_cols)
    x_p = kept_pts[:, 0] - cx[kept_pillar]
    y_p = kept_pts[:, 1] - cy[kept_pillar]

    augmented = np.column_stack([kept_pts, centered, x_p, y_p])
    features = np.zeros((n_pillars, max_points_per_pillar, feat_dim))
    features[kept_pillar, slot] = augmented

    return PillarTensor(
        features=features,
        coords=np.column_stack([p_rows, p_cols]).astype(np.int64).reshape(-1, 2),
        point_counts=counts.astype(np.int64),
        has_z=has_z,
        points_in_grid=n_inside,
        points_outside_grid=n_outside,
        points_truncated=n_inside - int(counts.sum()),
        pillars_dropped=int(pillars_dropped),
    )


@dataclass(frozen=True)
class PointNetWeights:
    linear: np.ndarray
    bias: np.ndarray = field(default=None)

    def __post_init__(self):
        linear = np.asarray(self.linear, dtype=np.float64)
        if linear.ndim != 2:
            raise ConfigurationError("linear weights must be a matrix")
        bias = np.zeros(linear.shape[1]) if self.bias is None else np.asarray(self.bias, dtype=np.float64)
        if bias.shape != (linear.shape[1],):
            raise ConfigurationError(
                f"bias shape {bias.shape} does not match {linear.shape[1]} output channels"
            )
        object.__setattr__(self, "linear", linear)
        object.__setattr__(self, "bias", bias)

    @property
    def in_dim(self) -> int:
        return self.linear.shape[0]

    @property
    def out_channels(self) -> int:
        return self.linear.shape[1]

    @classmethod
    def random(cls, feat_dim: int, out_channels: int, seed: int = 0) -> "PointNetWeights":
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(feat_dim)
        return cls(
            rng.normal(0.0, scale, size=(feat_dim, out_channels)),
            rng.normal(0.0, 0.1, size=out_channels),
        )


def pointnet_encode(pillars: PillarTensor, weights: PointNetWeights) -> np.ndarray:
    """Shared linear + ReLU per point, then max over occupied slots per pillar."""
    if weights.in_dim != pillars.feat_dim:
        raise ConfigurationError(
            f"weights expect {weights.in_dim} input features, pillars carry {pillars.feat_dim}"
        )
    if pillars.num_pillars == 0:
        return np.zeros((0, weights.out_channels))
    activ = np.maximum(pillars.features @ weights.linear + weights.bias, 0.0)
    mask = pillars.occupancy_mask()
    activ = np.where(mask[:, :, None], activ, -np.inf)
    pooled = activ.max(axis=1)
    # pillars never exist without points, this only guards hand-built tensors
    return np.where(np.isfinite(pooled), pooled, 0.0)


def scatter_to_bev(
    pillar_features: np.ndarray,
    pillar_coords: np.ndarray,
    grid: GridConfig,
    channels: Optional[int] = None,
) -> np.ndarray:
    """Write each pillar's feature vector into its BEV cell: ``[C, rows, cols]``."""
    feats = np.asarray(pillar_features, dtype=np.float64)
    coords = np.asarray(pillar_coords, dtype=np.int64).reshape(-1, 2)
    if channels is None:
        channels = feats.shape[1] if feats.ndim == 2 and feats.shape[0] else 0
    bev = np.zeros((channels, grid.rows, grid.cols))
    if coords.shape[0] == 0:
        return bev
    if feats.shape != (coords.shape[0], channels):
        raise ConfigurationError(
            f"pillar features {feats.shape} inconsistent with {coords.shape[0]} coords x {channels} channels"
        )
    linear = coords[:, 0] * grid.cols + coords[:, 1]
    if np.unique(linear).shape[0] != linear.shape[0]:
        raise AssertionError("duplicate pillar coordinates")
    if (coords < 0).any() or (coords[:, 0] >= grid.rows).any() or (coords[:, 1] >= grid.cols).any():
        raise AssertionError("pillar coordinates outside the grid")
    bev[:, coords[:, 0], coords[:, 1]] = feats.T
    return bev
