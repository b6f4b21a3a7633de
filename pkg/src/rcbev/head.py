"""BEV fusion by concatenation and center-heatmap head math.

Regression channel layout (``REGRESSION_CHANNELS``):
``dx, dy`` sub-cell offsets in cells, ``z`` in meters, ``log_l, log_w,
log_h``, ``sin_yaw, cos_yaw`` and ego-frame velocity ``vx, vy``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .camera_bev import BevFeatureMap
from .geometry import NUM_CLASSES, Box3D, GridConfig, ObjectClass

REGRESSION_CHANNELS = ("dx", "dy", "z", "log_l", "log_w", "log_h", "sin_yaw", "cos_yaw", "vx", "vy")
NUM_REGRESSION = len(REGRESSION_CHANNELS)
NO_ATTRIBUTE = -1


class GridMismatchError(ValueError):
    pass


def concat_bev(camera_map: BevFeatureMap, radar_map: BevFeatureMap) -> BevFeatureMap:
    """Stack camera channels followed by radar channels."""
    a, b = camera_map.grid, radar_map.grid
    for name in ("x_min", "x_max", "y_min", "y_max", "step"):
        if getattr(a, name) != getattr(b, name):
            raise GridMismatchError(
                f"grid {name} differs: camera {getattr(a, name)} vs radar {getattr(b, name)}"
            )
    cam, rad = camera_map.channels, radar_map.channels
    if cam.shape[1:] != rad.shape[1:]:
        dim = "rows" if cam.shape[1] != rad.shape[1] else "cols"
        raise GridMismatchError(f"{dim} differ: camera {cam.shape[1:]} vs radar {rad.shape[1:]}")
    return BevFeatureMap(np.concatenate([cam, rad], axis=0), a)


def gaussian_radius(length_cells: float, width_cells: float, min_overlap: float = 0.1) -> float:
    """Largest center shift keeping IoU >= ``min_overlap`` (CenterNet three-case bound)."""
    h, w = length_cells, width_cells
    b1 = h + w
    c1 = w * h * (1 - min_overlap) / (1 + min_overlap)
    r1 = (b1 + math.sqrt(b1 ** 2 - 4 * c1)) / 2

    a2 = 4
    b2 = 2 * (h + w)
    c2 = (1 - min_overlap) * w * h
    r2 = (b2 + math.sqrt(b2 ** 2 - 4 * a2 * c2)) / 2

    a3 = 4 * min_overlap
    b3 = -2 * min_overlap * (h + w)
    c3 = (min_overlap - 1) * w * h
    r3 = (b3 + math.sqrt(b3 ** 2 - 4 * a3 * c3)) / 2
    return min(r1, r2, r3)


def gaussian_kernel(radius: int) -> np.ndarray:
    diameter = 2 * radius + 1
    sigma = diameter / 6.0
    offs = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offs[:, None] ** 2 + offs[None, :] ** 2) / (2 * sigma * sigma))
    kernel[kernel < np.finfo(np.float64).eps * kernel.max()] = 0.0
    return kernel


def draw_gaussian(heatmap: np.ndarray, row: int, col: int, radius: int) -> None:
    """Max-combine a unit-peak Gaussian into ``heatmap`` in place."""
    kernel = gaussian_kernel(radius)
    rows, cols = heatmap.shape
    top, bottom = min(row, radius), min(rows - row, radius + 1)
    left, right = min(col, radius), min(cols - col, radius + 1)
    window = heatmap[row - top:row + bottom, col - left:col + right]
    patch = kernel[radius - top:radius + bottom, radius - left:radius + right]
    np.maximum(window, patch, out=window)


@dataclass
class TargetMaps:
    heatmaps: np.ndarray  # [K, rows, cols]
    regressions: np.ndarray  # [NUM_REGRESSION, rows, cols]
    regression_mask: np.ndarray  # [rows, cols] bool
    attributes: np.ndarray  # [rows, cols] int, NO_ATTRIBUTE where unset


@dataclass(frozen=True)
class Detection:
    box: Box3D
    row: int
    col: int

    @property
    def score(self) -> float:
        return self.box.score


def encode_box(box: Box3D, grid: GridConfig, row: int, col: int) -> np.ndarray:
    dx = (box.center[0] - grid.x_min) / grid.step - row
    dy = (box.center[1] - grid.y_min) / grid.step - col
    return np.array([
        dx, dy, box.center[2],
        math.log(box.length), math.log(box.width), math.log(box.height),
        math.sin(box.yaw), math.cos(box.yaw),
        box.velocity[0], box.velocity[1],
    ])


def render_targets(
    boxes: Sequence[Box3D],
    grid: GridConfig,
    num_classes: int = NUM_CLASSES,
    min_overlap: float = 0.1,
    min_radius: int = 2,
) -> TargetMaps:
    """Rasterize ground-truth boxes into heatmap and regression targets.

    Boxes whose center falls outside the grid are skipped. When two boxes
    share a center cell the later one owns the regression target.
    """
    heatmaps = np.zeros((num_classes, grid.rows, grid.cols))
    regressions = np.zeros((NUM_REGRESSION, grid.rows, grid.cols))
    mask = np.zeros(grid.shape, dtype=bool)
    attributes = np.full(grid.shape, NO_ATTRIBUTE, dtype=np.int64)
    for box in boxes:
        rows, cols, inside = grid.cell_indices(box.center[0], box.center[1])
        if not inside:
            continue
        row, col = int(rows), int(cols)
        radius = gaussian_radius(box.length / grid.step, box.width / grid.step, min_overlap)
        radius = max(min_radius, int(radius))
        draw_gaussian(heatmaps[int(box.class_id)], row, col, radius)
        regressions[:, row, col] = encode_box(box, grid, row, col)
        mask[row, col] = True
        attributes[row, col] = NO_ATTRIBUTE if box.attribute_id is None else box.attribute_id
    return TargetMaps(heatmaps, regressions, mask, attributes)


def gaussian_focal_loss(pred, target, alpha: float = 2.0, beta: float = 4.0) -> float:
    """Penalty-reduced focal loss over center heatmaps, normalized by peak count."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    pos = target == 1.0
    pos_loss = -np.log(pred) * (1 - pred) ** alpha
    neg_loss = -np.log(1 - pred) * pred ** alpha * (1 - target) ** beta
    total = pos_loss[pos].sum() + neg_loss[~pos].sum()
    return float(total / max(int(pos.sum()), 1))


def l1_regression_loss(pred, target, mask) -> float:
    """Mean absolute error over masked cells and all channels.

    ``pred``/``target`` are ``[C, rows, cols]`` and ``mask`` is ``[rows, cols]``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    mask = np.asarray(mask, dtype=bool)
    n = int(mask.sum())
    if n == 0:
        return 0.0
    diff = np.abs(pred - target)[:, mask]
    return float(diff.sum() / (n * pred.shape[0]))


def local_maxima(heatmap: np.ndarray, kernel: int = 3) -> np.ndarray:
    """Cells that are >= every neighbor in the window and > every earlier neighbor.

    "Earlier" means smaller (row, col) in raster order, so a plateau keeps
    only its first cell.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError("nms kernel must be a positive odd integer")
    half = kernel // 2
    rows, cols = heatmap.shape
    padded = np.pad(heatmap, half, mode="constant", constant_values=-np.inf)
    keep = np.ones(heatmap.shape, dtype=bool)
    for dr in range(-half, half + 1):
        for dc in range(-half, half + 1):
            if dr == 0 and dc == 0:
                continue
            neighbor = padded[half + dr:half + dr + rows, half + dc:half + dc + cols]
            if (dr, dc) < (0, 0):
                keep &= heatmap > neighbor
            else:
                keep &= heatmap >= neighbor
    return keep


def decode_detections(
    heatmaps,
    regressions,
    grid: GridConfig,
    score_threshold: float = 0.1,
    max_detections: int = 500,
    nms_kernel: int = 3,
    attributes: Optional[np.ndarray] = None,
) -> list:
    """Turn head outputs into scored boxes.

    Candidates are per-class local maxima with score >= ``score_threshold``;
    the best ``max_detections`` by score survive (ties keep class, row, col
    order).
    """
    heatmaps = np.asarray(heatmaps, dtype=np.float64)
    regressions = np.asarray(regressions, dtype=np.float64)
    candidates = []
    for cls in range(heatmaps.shape[0]):
        hm = heatmaps[cls]
        peaks = local_maxima(hm, nms_kernel) & (hm >= score_threshold)
        for row, col in np.argwhere(peaks):
            candidates.append((-hm[row, col], cls, int(row), int(col)))
    candidates.sort()
    out = []
    for neg_score, cls, row, col in candidates[:max_detections]:
        reg = regressions[:, row, col]
        attr = None
        if attributes is not None and attributes[row, col] != NO_ATTRIBUTE:
            attr = int(attributes[row, col])
        box = Box3D(
            center=(
                (row + reg[0]) * grid.step + grid.x_min,
                (col + reg[1]) * grid.step + grid.y_min,
                reg[2],
            ),
            size=tuple(np.exp(reg[3:6])),
            yaw=math.atan2(reg[6], reg[7]),
            velocity=(reg[8], reg[9]),
            class_id=ObjectClass(cls),
            attribute_id=attr,
            score=min(max(-neg_score, 0.0), 1.0),
        )
        out.append(Detection(box, row, col))
    return out
