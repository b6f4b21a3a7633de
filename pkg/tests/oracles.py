"""Reference computations kept independent of the package's code paths."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def monte_carlo_iou_bev(a, b, samples=1_000_000, rng=None):
    """Estimate BEV IoU by sampling points uniformly inside box ``a``.

    The fraction of samples that also fall inside ``b`` times area(a) gives
    the intersection area. Samples are mapped from a's local frame straight
    into b's with one relative rotation and offset.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    rel = a.yaw - b.yaw
    cr, sr = math.cos(rel), math.sin(rel)
    cb, sb = math.cos(b.yaw), math.sin(b.yaw)
    dx, dy = a.center[0] - b.center[0], a.center[1] - b.center[1]
    ox, oy = cb * dx + sb * dy, -sb * dx + cb * dy

    u = rng.random(samples, dtype=np.float32)
    u -= 0.5
    u *= a.length
    v = rng.random(samples, dtype=np.float32)
    v -= 0.5
    v *= a.width
    along = cr * u - sr * v + ox
    across = sr * u + cr * v + oy
    np.abs(along, out=along)
    np.abs(across, out=across)
    inside = np.count_nonzero((along <= b.length / 2) & (across <= b.width / 2))
    area_a, area_b = a.length * a.width, b.length * b.width
    inter = inside / samples * area_a
    return inter / (area_a + area_b - inter)


def _points(tp_flags, num_gt):
    """Exact (recall, precision) after each detection, as Fractions."""
    pts = []
    tp = 0
    for k, flag in enumerate(tp_flags, 1):
        tp += int(flag)
        pts.append((Fraction(tp, num_gt), Fraction(tp, k)))
    return pts


def brute_force_ap_kitti40(tp_flags, num_gt):
    """Mean over r = 1/40 .. 40/40 of the best precision reachable at recall >= r."""
    if num_gt == 0:
        return None if not tp_flags else 0.0
    pts = _points(tp_flags, num_gt)
    total = Fraction(0)
    for j in range(1, 41):
        r = Fraction(j, 40)
        reachable = [p for rec, p in pts if rec >= r]
        total += max(reachable) if reachable else 0
    return float(100 * total / 40)


def brute_force_ap_nuscenes(tp_flags, num_gt, min_recall=Fraction(1, 10), min_precision=Fraction(1, 10)):
    """Piecewise-linear precision(recall) sampled at i/100, clipped and rescaled.

    Each distinct recall level r has the precision of the first and of the
    last detection reaching it. The curve equals the last one at r, runs
    linearly from the last value at one level to the first value at the
    next, holds the very first precision left of the first level and is
    zero beyond the final level.
    """
    if num_gt == 0:
        return None if not tp_flags else 0.0
    if not tp_flags:
        return 0.0
    pts = _points(tp_flags, num_gt)
    levels = {}
    for rec, p in pts:
        first = levels[rec][0] if rec in levels else p
        levels[rec] = (first, p)
    knots = sorted(levels.items())

    def precision_at(r):
        if r < knots[0][0]:
            return pts[0][1]
        if r > knots[-1][0]:
            return Fraction(0)
        for (r0, (_, last0)), (r1, (first1, _)) in zip(knots, knots[1:]):
            if r0 < r < r1:
                return last0 + (first1 - last0) * (r - r0) / (r1 - r0)
        return levels[r][1]

    first = int(100 * min_recall) + 1
    vals = []
    for i in range(first, 101):
        v = precision_at(Fraction(i, 100)) - min_precision
        vals.append(max(v, Fraction(0)))
    return float(100 * (sum(vals) / len(vals)) / (1 - min_precision))


def greedy_match_oracle(det_scores, det_gt_costs):
    """Matching by exhaustive scan: for each det in score order pick the
    lowest-cost admissible gt not yet taken. ``det_gt_costs[i][j]`` is a cost
    or ``None``."""
    order = sorted(range(len(det_scores)), key=lambda i: (-det_scores[i], i))
    taken = set()
    flags = []
    for i in order:
        options = [(c, j) for j, c in enumerate(det_gt_costs[i]) if c is not None and j not in taken]
        if options:
            _, j = min(options)
            taken.add(j)
            flags.append(True)
        else:
            flags.append(False)
    return flags
