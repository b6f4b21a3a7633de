"""The two dataset evaluation protocols built on :mod:`rcbev.metrics`.

* nuScenes style: center-distance matching, AP averaged over distance
  thresholds with 101-point sampling, TP errors at 2 m.
* View-of-Delft style: IoU matching in image 2D, BEV and 3D with 40-point
  interpolated AP.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .geometry import CameraModel, ObjectClass
from .metrics import (
    KITTI_40,
    NUSCENES_101,
    CenterDistance,
    IoUMatcher,
    PRCurve,
    TPErrors,
    aggregate_map,
    average_precision,
    pr_curve,
    tp_errors,
)

NUSCENES_DIST_THRESHOLDS = (0.5, 1.0, 2.0, 4.0)
TP_DIST_THRESHOLD = 2.0
VOD_IOU_THRESHOLDS = {"pedestrian": 0.25, "cyclist": 0.25, "car": 0.5}
VOD_VARIANTS = ("2d", "bev", "3d")

Frames = Mapping[str, list]


@dataclass
class ClassEval:
    ap: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    tp_errors: Optional[TPErrors] = None
    num_gt: int = 0
    num_det: int = 0


@dataclass
class APResult:
    protocol: str
    per_class: dict = field(default_factory=dict)
    map: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        classes = {}
        for label, ce in self.per_class.items():
            entry = {"ap": ce.ap, "num_gt": ce.num_gt, "num_det": ce.num_det}
            if ce.tp_errors is not None:
                entry["tp_errors"] = ce.tp_errors.as_dict()
            classes[label] = entry
        return {"protocol": self.protocol, "classes": classes, "map": self.map}


def split_by_class(frames: Frames, cls: ObjectClass) -> dict:
    return {fid: [b for b in boxes if b.class_id == cls] for fid, boxes in frames.items()}


def _count(frames: Frames) -> int:
    return sum(len(v) for v in frames.values())


def _threshold_key(th: float) -> str:
    return f"d{th:g}"


def evaluate_nuscenes(
    dets: Frames,
    gts: Frames,
    thresholds=NUSCENES_DIST_THRESHOLDS,
    tp_threshold: float = TP_DIST_THRESHOLD,
) -> APResult:
    result = APResult("nuscenes")
    for cls in ObjectClass:
        d, g = split_by_class(dets, cls), split_by_class(gts, cls)
        ce = ClassEval(num_gt=_count(g), num_det=_count(d))
        for th in thresholds:
            match = CenterDistance(th).match(d, g)
            key = _threshold_key(th)
            ce.ap[key] = average_precision(match.tp_flags, match.num_gt, NUSCENES_101)
            ce.curves[key] = pr_curve(match.tp_flags, match.num_gt, NUSCENES_101)
        per_th = [ce.ap[_threshold_key(th)] for th in thresholds]
        ce.ap["mean"] = None if any(v is None for v in per_th) else sum(per_th) / len(per_th)
        tp_match = CenterDistance(tp_threshold).match(d, g)
        ce.tp_errors = tp_errors(tp_match, d, g)
        result.per_class[cls.label] = ce
    keys = [_threshold_key(th) for th in thresholds] + ["mean"]
    for key in keys:
        result.map[key] = aggregate_map({c: ce.ap[key] for c, ce in result.per_class.items()})
    return result


def evaluate_vod(
    dets: Frames,
    gts: Frames,
    cameras: Mapping[str, CameraModel],
    variants=VOD_VARIANTS,
    iou_thresholds: Optional[Mapping[str, float]] = None,
) -> APResult:
    thresholds = dict(VOD_IOU_THRESHOLDS)
    thresholds.update(iou_thresholds or {})
    result = APResult("vod")
    for cls in ObjectClass:
        d, g = split_by_class(dets, cls), split_by_class(gts, cls)
        ce = ClassEval(num_gt=_count(g), num_det=_count(d))
        for variant in variants:
            matcher = IoUMatcher(variant, thresholds[cls.label], cameras if variant == "2d" else None)
            match = matcher.match(d, g)
            ce.ap[variant] = average_precision(match.tp_flags, match.num_gt, KITTI_40)
            ce.curves[variant] = pr_curve(match.tp_flags, match.num_gt, KITTI_40)
        result.per_class[cls.label] = ce
    for variant in variants:
        result.map[variant] = aggregate_map({c: ce.ap[variant] for c, ce in result.per_class.items()})
    return result


def _fmt(value) -> str:
    return "   -" if value is None else f"{value:5.1f}"


def format_table(result: APResult) -> str:
    """Text table: mAP then per-class AP, one column group per metric key."""
    labels = [c.label for c in ObjectClass]
    if result.protocol == "nuscenes":
        head = ["mAP"] + [f"AP {lab[:3]}" for lab in labels]
        rows = [[result.map.get("mean")] + [result.per_class[lab].ap.get("mean") for lab in labels]]
        lines = ["  ".join(f"{h:>7}" for h in head)]
        lines += ["  ".join(f"{_fmt(v):>7}" for v in row) for row in rows]
        err_head = ["class", "ATE", "ASE", "AOE", "AVE", "AAE"]
        lines.append("")
        lines.append("  ".join(f"{h:>10}" for h in err_head))
        for lab in labels:
            errs = result.per_class[lab].tp_errors or TPErrors()
            vals = [errs.ate, errs.ase, errs.aoe, errs.ave, errs.aae]
            lines.append(
                f"{lab:>10}  " + "  ".join(f"{'-' if v is None else f'{v:.2f}':>10}" for v in vals)
            )
        return "\n".join(lines)
    variants = list(result.map)
    head = [f"mAP {v}" for v in variants]
    for lab in labels:
        head += [f"{lab[:3]} {v}" for v in variants]
    row = [result.map[v] for v in variants]
    for lab in labels:
        row += [result.per_class[lab].ap.get(v) for v in variants]
    return "\n".join(["  ".join(f"{h:>8}" for h in head), "  ".join(f"{_fmt(v):>8}" for v in row)])


def class_ap_table(per_class_ap: Mapping[str, Optional[float]]) -> str:
    """One-row mAP/AP table from already computed class APs."""
    labels = [c.label for c in ObjectClass]
    head = ["mAP"] + [f"AP {lab[:3]}" for lab in labels]
    row = [aggregate_map(per_class_ap)] + [per_class_ap.get(lab) for lab in labels]
    return "\n".join(["  ".join(f"{h:>7}" for h in head), "  ".join(f"{_fmt(v):>7}" for v in row)])


def write_curves_csv(curve: PRCurve) -> str:
    lines = ["recall,precision"]
    lines += [f"{r:.6f},{p:.9f}" for r, p in zip(curve.recall, curve.precision)]
    return "\n".join(lines) + "\n"
