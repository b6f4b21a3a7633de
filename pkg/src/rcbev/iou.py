"""Rotated-box overlap in BEV and 3D, plus the image-plane 2D variant."""

from __future__ import annotations

import numpy as np

from .geometry import Box3D, CameraModel, box_corners_3d, box_corners_bev, transform_points

DEGENERATE_AREA = 1e-12


def polygon_area(poly: np.ndarray) -> float:
    """Shoelace area; positive for counterclockwise vertex order."""
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_convex(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Intersect two convex counterclockwise polygons by successive half-plane clipping."""
    out = [tuple(p) for p in subject]
    n = len(clipper)
    for i in range(n):
        if not out:
            break
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % n]
        ex, ey = bx - ax, by - ay

        def side(p):
            return ex * (p[1] - ay) - ey * (p[0] - ax)

        inp, out = out, []
        prev = inp[-1]
        prev_side = side(prev)
        for cur in inp:
            cur_side = side(cur)
            if cur_side >= 0:
                if prev_side < 0:
                    out.append(_crossing(prev, cur, prev_side, cur_side))
                out.append(cur)
            elif prev_side >= 0:
                out.append(_crossing(prev, cur, prev_side, cur_side))
            prev, prev_side = cur, cur_side
    return np.array(out, dtype=np.float64).reshape(-1, 2)


def _crossing(p, q, sp, sq):
    t = sp / (sp - sq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    inter = clip_convex(box_corners_bev(a), box_corners_bev(b))
    return max(polygon_area(inter), 0.0)


def iou_bev(a: Box3D, b: Box3D) -> float:
    area_a = a.length * a.width
    area_b = b.length * b.width
    if area_a < DEGENERATE_AREA or area_b < DEGENERATE_AREA:
        return 0.0
    inter = bev_intersection_area(a, b)
    union = area_a + area_b - inter
    return float(min(max(inter / union, 0.0), 1.0))


def vertical_overlap(a: Box3D, b: Box3D) -> float:
    lo = max(a.center[2] - a.height / 2, b.center[2] - b.height / 2)
    hi = min(a.center[2] + a.height / 2, b.center[2] + b.height / 2)
    return max(hi - lo, 0.0)


def iou_3d(a: Box3D, b: Box3D) -> float:
    if a.volume < DEGENERATE_AREA or b.volume < DEGENERATE_AREA:
        return 0.0
    dz = vertical_overlap(a, b)
    if dz <= 0.0:
        return 0.0
    inter = bev_intersection_area(a, b) * dz
    union = a.volume + b.volume - inter
    return float(min(max(inter / union, 0.0), 1.0))


def rect_iou(r1, r2) -> float:
    """IoU of axis-aligned rectangles given as ``(x0, y0, x1, y1)``."""
    area1 = max(r1[2] - r1[0], 0.0) * max(r1[3] - r1[1], 0.0)
    area2 = max(r2[2] - r2[0], 0.0) * max(r2[3] - r2[1], 0.0)
    iw = min(r1[2], r2[2]) - max(r1[0], r2[0])
    ih = min(r1[3], r2[3]) - max(r1[1], r2[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = area1 + area2 - inter
    if union <= DEGENERATE_AREA:
        return 0.0
    return float(inter / union)


def image_rectangle(box: Box3D, camera: CameraModel):
    """Bounding rectangle of the projected corners clipped to the image.

    Only corners in front of the camera contribute; returns ``None`` when no
    corner has positive depth or the clipped rectangle is empty.
    """
    cam = transform_points(camera.extrinsics, box_corners_3d(box))
    front = cam[cam[:, 2] > 1e-6]
    if len(front) == 0:
        return None
    u = camera.fx * front[:, 0] / front[:, 2] + camera.cx
    v = camera.fy * front[:, 1] / front[:, 2] + camera.cy
    x0, x1 = np.clip([u.min(), u.max()], 0, camera.width)
    y0, y1 = np.clip([v.min(), v.max()], 0, camera.height)
    if x1 <= x0 or y1 <= y0:
        return None
    return (float(x0), float(y0), float(x1), float(y1))


def iou_2d_image(a: Box3D, b: Box3D, camera: CameraModel) -> float:
    ra, rb = image_rectangle(a, camera), image_rectangle(b, camera)
    if ra is None or rb is None:
        return 0.0
    return rect_iou(ra, rb)
