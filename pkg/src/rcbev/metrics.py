"""Detection matching, precision-recall integration and true-positive errors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .geometry import Box3D, CameraModel
from .iou import iou_2d_image, iou_3d, iou_bev

NUSCENES_101 = "nuscenes_101"
KITTI_40 = "kitti_40"
INTERPOLATIONS = (NUSCENES_101, KITTI_40)

MIN_RECALL = 0.1
MIN_PRECISION = 0.1

BoxSet = Union[Sequence[Box3D], Mapping[str, Sequence[Box3D]]]


def _flatten(boxes: BoxSet) -> list:
    """``[(frame_id, box), ...]``; a bare sequence is treated as one frame."""
    if isinstance(boxes, Mapping):
        return [(frame, box) for frame, items in boxes.items() for box in items]
    return [("", box) for box in boxes]


@dataclass
class MatchResult:
    """Greedy assignment of detections to ground truth.

    ``order`` lists detection indices by descending score; ``tp_flags`` and
    ``scores`` follow that order. ``pairs`` holds ``(det_idx, gt_idx, score)``.
    """

    order: np.ndarray
    tp_flags: np.ndarray
    scores: np.ndarray
    num_gt: int
    pairs: list = field(default_factory=list)

    @property
    def tp(self) -> int:
        return int(self.tp_flags.sum())

    @property
    def fp(self) -> int:
        return int(len(self.tp_flags) - self.tp_flags.sum())

    @property
    def fn(self) -> int:
        return self.num_gt - self.tp

    def counts_at(self, score_threshold: float) -> tuple:
        """``(tp, fp, fn)`` counting only detections scoring >= the threshold."""
        keep = self.scores >= score_threshold
        tp = int(self.tp_flags[keep].sum())
        fp = int(keep.sum()) - tp
        return tp, fp, self.num_gt - tp


def _greedy_match(dets: BoxSet, gts: BoxSet, cost: Callable) -> MatchResult:
    """Walk detections by descending score; each takes the best free gt it accepts.

    ``cost(frame_id, det, gt)`` returns a value where lower is better, or
    ``None`` when the pair is not admissible. Ties keep the earlier gt.
    """
    det_list = _flatten(dets)
    gt_list = _flatten(gts)
    gts_by_frame: dict = {}
    for gi, (frame, _) in enumerate(gt_list):
        gts_by_frame.setdefault(frame, []).append(gi)

    scores = np.array([b.score if b.score is not None else 0.0 for _, b in det_list], dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    taken = np.zeros(len(gt_list), dtype=bool)
    flags = np.zeros(len(det_list), dtype=bool)
    pairs = []
    for rank, di in enumerate(order):
        frame, det = det_list[di]
        best, best_cost = None, None
        for gi in gts_by_frame.get(frame, ()):
            if taken[gi]:
                continue
            c = cost(frame, det, gt_list[gi][1])
            if c is not None and (best_cost is None or c < best_cost):
                best, best_cost = gi, c
        if best is not None:
            taken[best] = True
            flags[rank] = True
            pairs.append((int(di), int(best), float(scores[di])))
    return MatchResult(order, flags, scores[order], len(gt_list), pairs)


def bev_center_distance(a: Box3D, b: Box3D) -> float:
    return math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])


def match_center_distance(dets: BoxSet, gts: BoxSet, threshold: float) -> MatchResult:
    """Nearest free ground truth with BEV center distance below ``threshold``."""

    def cost(_frame, d, g):
        dist = bev_center_distance(d, g)
        return dist if dist < threshold else None

    return _greedy_match(dets, gts, cost)


def match_iou(dets: BoxSet, gts: BoxSet, iou_fn: Callable, threshold: float) -> MatchResult:
    """Highest-overlap free ground truth with IoU above ``threshold``.

    ``iou_fn(frame_id, det, gt)`` lets per-frame data such as cameras in.
    """

    def cost(frame, d, g):
        overlap = iou_fn(frame, d, g)
        return -overlap if overlap > threshold else None

    return _greedy_match(dets, gts, cost)


@dataclass(frozen=True)
class CenterDistance:
    threshold: float

    def match(self, dets: BoxSet, gts: BoxSet) -> MatchResult:
        return match_center_distance(dets, gts, self.threshold)


@dataclass(frozen=True)
class IoUMatcher:
    """IoU matching in ``"2d"`` (image plane), ``"bev"`` or ``"3d"``.

    The 2D variant needs ``camera``: either one model or a mapping from
    frame id to model.
    """

    variant: str
    threshold: float
    camera: Optional[Union[CameraModel, Mapping[str, CameraModel]]] = None

    def __post_init__(self):
        if self.variant not in ("2d", "bev", "3d"):
            raise ValueError(f"unknown IoU variant {self.variant!r}")
        if self.variant == "2d" and self.camera is None:
            raise ValueError("2d IoU needs a camera model")

    def match(self, dets: BoxSet, gts: BoxSet) -> MatchResult:
        return match_iou(dets, gts, self.overlap, self.threshold)

    def overlap(self, frame: str, a: Box3D, b: Box3D) -> float:
        if self.variant == "bev":
            return iou_bev(a, b)
        if self.variant == "3d":
            return iou_3d(a, b)
        camera = self.camera if isinstance(self.camera, CameraModel) else self.camera[frame]
        return iou_2d_image(a, b, camera)


@dataclass
class PRCurve:
    recall: np.ndarray
    precision: np.ndarray
    interpolation: str


def operating_points(tp_flags, num_gt: int) -> tuple:
    """Precision and recall after each detection of a score-sorted sweep."""
    flags = np.asarray(tp_flags, dtype=np.float64)
    tp = np.cumsum(flags)
    fp = np.cumsum(1.0 - flags)
    precision = tp / np.maximum(tp + fp, 1.0)
    recall = tp / num_gt if num_gt else np.zeros_like(tp)
    return precision, recall


def _devkit_interp(samples: np.ndarray, recall: np.ndarray, precision: np.ndarray) -> np.ndarray:
    """Piecewise-linear precision(recall) as the nuScenes devkit samples it.

    The devkit hands the raw sweep, repeated recalls included, to
    ``np.interp``. Spelled out: at a recall reached by several detections
    the value is the last one's precision; between two recall levels the
    line runs from the last precision of the lower level to the first
    precision of the upper one; left of the first recall the first
    detection's precision holds and beyond the final recall it is 0.
    """
    first = np.r_[True, recall[1:] != recall[:-1]]
    last = np.r_[recall[1:] != recall[:-1], True]
    levels = recall[last]
    p_first, p_last = precision[first], precision[last]
    k = np.searchsorted(levels, samples, side="right") - 1
    out = np.zeros_like(samples)
    below = k < 0
    out[below] = precision[0]
    on = ~below & (samples == levels[np.maximum(k, 0)])
    out[on] = p_last[k[on]]
    between = ~below & ~on & (k < len(levels) - 1)
    kb = k[between]
    t = (samples[between] - levels[kb]) / (levels[kb + 1] - levels[kb])
    out[between] = p_last[kb] + t * (p_first[kb + 1] - p_last[kb])
    return out


def pr_curve(tp_flags, num_gt: int, interpolation: str = NUSCENES_101) -> PRCurve:
    """Precision sampled at the recall positions of the chosen scheme."""
    if interpolation not in INTERPOLATIONS:
        raise ValueError(f"unknown interpolation {interpolation!r}")
    flags = np.asarray(tp_flags, dtype=bool)
    if interpolation == NUSCENES_101:
        samples = np.arange(101) / 100.0
    else:
        samples = np.arange(1, 41) / 40.0
    if num_gt == 0 or len(flags) == 0:
        return PRCurve(samples, np.zeros_like(samples), interpolation)
    precision, recall = operating_points(flags, num_gt)
    if interpolation == NUSCENES_101:
        sampled = _devkit_interp(samples, recall, precision)
    else:
        envelope = np.maximum.accumulate(precision[::-1])[::-1]
        idx = np.searchsorted(recall, samples, side="left")
        sampled = np.where(idx < len(recall), envelope[np.minimum(idx, len(recall) - 1)], 0.0)
    return PRCurve(samples, sampled, interpolation)


def average_precision(tp_flags, num_gt: int, interpolation: str = NUSCENES_101) -> Optional[float]:
    """AP in percent from score-sorted TP flags; ``None`` when nothing to score."""
    flags = np.asarray(tp_flags, dtype=bool)
    if num_gt == 0:
        return None if len(flags) == 0 else 0.0
    curve = pr_curve(flags, num_gt, interpolation)
    if interpolation == NUSCENES_101:
        prec = curve.precision[int(round(100 * MIN_RECALL)) + 1:] - MIN_PRECISION
        prec[prec < 0] = 0.0
        return 100.0 * float(np.mean(prec)) / (1.0 - MIN_PRECISION)
    return 100.0 * float(np.mean(curve.precision))


def compute_ap(dets: BoxSet, gts: BoxSet, matcher, interpolation: str = NUSCENES_101) -> Optional[float]:
    match = matcher.match(dets, gts)
    return average_precision(match.tp_flags, match.num_gt, interpolation)


@dataclass
class TPErrors:
    ate: Optional[float] = None
    ase: Optional[float] = None
    aoe: Optional[float] = None
    ave: Optional[float] = None
    aae: Optional[float] = None

    def as_dict(self) -> dict:
        return {"ate": self.ate, "ase": self.ase, "aoe": self.aoe, "ave": self.ave, "aae": self.aae}


def yaw_difference(a: float, b: float) -> float:
    """Smallest absolute angle between two headings, in [0, pi]."""
    diff = abs(math.remainder(a - b, 2.0 * math.pi))
    return min(diff, math.pi)


def scale_iou(a: Box3D, b: Box3D) -> float:
    """IoU of the two boxes after aligning centers and headings."""
    inter = 1.0
    for sa, sb in zip(a.size, b.size):
        inter *= min(sa, sb)
    return inter / (a.volume + b.volume - inter)


def tp_errors(match: MatchResult, dets: BoxSet, gts: BoxSet) -> TPErrors:
    """Mean translation/scale/orientation/velocity/attribute errors over matches."""
    if not match.pairs:
        return TPErrors()
    det_list = [b for _, b in _flatten(dets)]
    gt_list = [b for _, b in _flatten(gts)]
    trans, scale, orient, vel = [], [], [], []
    attr_hits, attr_total = 0, 0
    for di, gi, _ in match.pairs:
        d, g = det_list[di], gt_list[gi]
        trans.append(bev_center_distance(d, g))
        scale.append(1.0 - scale_iou(d, g))
        orient.append(yaw_difference(d.yaw, g.yaw))
        vel.append(math.hypot(d.velocity[0] - g.velocity[0], d.velocity[1] - g.velocity[1]))
        if g.attribute_id is not None:
            attr_total += 1
            attr_hits += int(d.attribute_id == g.attribute_id)
    return TPErrors(
        ate=float(np.mean(trans)),
        ase=float(np.mean(scale)),
        aoe=float(np.mean(orient)),
        ave=float(np.mean(vel)),
        aae=(1.0 - attr_hits / attr_total) if attr_total else None,
    )


def aggregate_map(per_class_ap: Mapping) -> Optional[float]:
    """Unweighted mean over classes whose AP is defined."""
    values = [v for v in per_class_ap.values() if v is not None]
    if not values:
        return None
    return float(sum(values) / len(values))
