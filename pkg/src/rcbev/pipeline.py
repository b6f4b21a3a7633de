"""Per-frame processing chains used by the CLI."""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .camera_bev import BevFeatureMap, default_depth_bins, lift, splat
from .config import PipelineConfig
from .dataset import FrameRecord, filter_fov
from .geometry import GridConfig
from .head import TargetMaps, concat_bev, render_targets
from .pillars import (
    PointNetWeights,
    accumulate_sweeps,
    feature_columns,
    pillarize,
    pointnet_encode,
    scatter_to_bev,
)
from .tensor_io import read_tensor, write_tensor


def frame_seed(seed: int, frame_id: str) -> int:
    """Per-frame seed independent of scheduling order."""
    ss = np.random.SeedSequence([seed, zlib.crc32(frame_id.encode("utf-8"))])
    return int(ss.generate_state(1)[0])


def load_pointnet_weights(cfg: PipelineConfig, has_z: bool) -> PointNetWeights:
    """Weights from the configured tensor file, else seeded random ones.

    A weights file holds a ``[feat_dim + 1, out_channels]`` matrix whose last
    row is the bias.
    """
    feat_dim = len(feature_columns(has_z))
    if cfg.radar.weights:
        mat = read_tensor(cfg.radar.weights).astype(np.float64)
        return PointNetWeights(mat[:-1], mat[-1])
    return PointNetWeights.random(feat_dim, cfg.radar.out_channels, seed=cfg.seed + feat_dim)


def ground_truth_boxes(frame: FrameRecord, grid: GridConfig, fov: bool = True, in_grid: bool = True) -> list:
    boxes = list(frame.annotations)
    if fov:
        boxes = filter_fov(boxes, frame.camera)
    if in_grid:
        boxes = [b for b in boxes if grid.contains(b.center[0], b.center[1])]
    return boxes


@dataclass
class FrameOutput:
    frame_id: str
    bev: np.ndarray
    targets: TargetMaps
    counters: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)


def preprocess_frame(frame: FrameRecord, cfg: PipelineConfig) -> FrameOutput:
    grid = cfg.grid_config
    seed = frame_seed(cfg.seed, frame.frame_id)

    t0 = time.perf_counter()
    cloud = accumulate_sweeps(
        frame.sweeps(), frame.ego_pose, frame.timestamp * 1e-6, cfg.radar.num_sweeps, frame.has_z
    )
    t1 = time.perf_counter()
    pillars = pillarize(cloud, grid, cfg.radar.max_points_per_pillar, cfg.radar.max_pillars, seed)
    weights = load_pointnet_weights(cfg, frame.has_z)
    encoded = pointnet_encode(pillars, weights)
    radar = BevFeatureMap(scatter_to_bev(encoded, pillars.coords, grid, weights.out_channels), grid)
    t2 = time.perf_counter()

    bins = cfg.camera.depth_bins
    inputs = frame.load_camera_inputs(default_depth_bins(bins.start, bins.stop, bins.step))
    lifted_points = 0
    if inputs is None:
        camera = BevFeatureMap(np.zeros((cfg.camera.channels, grid.rows, grid.cols)), grid)
    else:
        feats, depth = inputs
        pseudo = lift(feats, depth, frame.camera)
        lifted_points = len(pseudo)
        camera = splat(pseudo, grid)
    t3 = time.perf_counter()

    fused = concat_bev(camera, radar)
    boxes = ground_truth_boxes(frame, grid)
    targets = render_targets(boxes, grid, min_overlap=cfg.head.min_overlap, min_radius=cfg.head.min_radius)
    t4 = time.perf_counter()

    timings = {"accumulate": t1 - t0, "radar": t2 - t1, "camera": t3 - t2, "fuse_targets": t4 - t3}
    counters = {
        "sweeps_used": cloud.sweeps_used,
        "radar_points": len(cloud),
        "points_in_grid": pillars.points_in_grid,
        "points_outside_grid": pillars.points_outside_grid,
        "points_kept": int(pillars.point_counts.sum()),
        "points_truncated": pillars.points_truncated,
        "pillars": pillars.num_pillars,
        "pillars_dropped": pillars.pillars_dropped,
        "pseudo_points": lifted_points,
        "boxes_kept": len(boxes),
        "boxes_dropped": len(frame.annotations) - len(boxes),
    }
    return FrameOutput(frame.frame_id, fused.channels.astype(np.float32), targets, counters, timings)


def write_targets(out_dir: Path, targets: TargetMaps) -> None:
    write_tensor(out_dir / "heatmap.rct", targets.heatmaps)
    write_tensor(out_dir / "regression.rct", targets.regressions)
    write_tensor(out_dir / "mask.rct", targets.regression_mask)
    write_tensor(out_dir / "attributes.rct", targets.attributes)


def read_head_outputs(frame_dir: Path) -> tuple:
    heatmaps = read_tensor(frame_dir / "heatmap.rct")
    regressions = read_tensor(frame_dir / "regression.rct")
    attr_path = frame_dir / "attributes.rct"
    attributes: Optional[np.ndarray] = read_tensor(attr_path) if attr_path.exists() else None
    return heatmaps, regressions, attributes


def write_frame_output(out_root: Path, output: FrameOutput) -> None:
    frame_dir = out_root / output.frame_id
    write_tensor(frame_dir / "bev.rct", output.bev)
    write_targets(frame_dir, output.targets)
