"""Deterministic synthetic scenes in the canonical dataset format.

Used for the shipped fixture dataset and the end-to-end tests. Objects sit
in the frontal camera's field of view, well apart from each other; radar
returns are scattered on object footprints plus background clutter, and
the ego vehicle drives forward at constant speed so that past sweeps need
real motion compensation.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .dataset import CameraInputs, FrameRecord, RadarSweepRecord, write_frames
from .geometry import Box3D, CameraModel, ObjectClass, Pose, transform_points
from .tensor_io import write_tensor

# ego x forward / y left / z up  ->  camera x right / y down / z forward
EGO_TO_CAMERA_AXES = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])

CLASS_SIZES = {
    ObjectClass.PEDESTRIAN: (0.8, 0.7, 1.75),
    ObjectClass.CYCLIST: (1.8, 0.7, 1.6),
    ObjectClass.CAR: (4.4, 1.9, 1.6),
}


def front_camera(width: int = 320, height: int = 192, focal: float = 200.0, mount=(0.0, 0.0, 1.5)) -> CameraModel:
    k = np.array([[focal, 0.0, width / 2.0], [0.0, focal, height / 2.0], [0.0, 0.0, 1.0]])
    mount = np.asarray(mount, dtype=np.float64)
    extrinsics = Pose(EGO_TO_CAMERA_AXES, -EGO_TO_CAMERA_AXES @ mount)
    return CameraModel(k, extrinsics, width, height)


def _place_objects(rng: np.random.Generator, camera: CameraModel, per_class: int = 2) -> list:
    boxes = []
    half_fov = math.atan(camera.cx / camera.fx) * 0.8
    for cls in ObjectClass:
        placed = 0
        while placed < per_class:
            dist = rng.uniform(8.0, 45.0)
            bearing = rng.uniform(-half_fov, half_fov)
            x, y = dist * math.cos(bearing), dist * math.sin(bearing)
            if any(math.hypot(x - b.center[0], y - b.center[1]) < 6.0 for b in boxes):
                continue
            length, width, height = CLASS_SIZES[cls]
            moving = bool(rng.random() < 0.5)
            speed = rng.uniform(1.0, 8.0) if moving else 0.0
            yaw = rng.uniform(-math.pi, math.pi)
            boxes.append(Box3D(
                center=(x, y, height / 2.0),
                size=(length, width, height),
                yaw=yaw,
                velocity=(speed * math.cos(yaw), speed * math.sin(yaw)),
                class_id=cls,
                attribute_id=0 if moving else 1,
            ))
            placed += 1
    return boxes


def _radar_returns(rng, boxes, key_pose: Pose, sweep_pose: Pose, has_z: bool, clutter: int = 30):
    """Returns in the sweep's ego frame as ``x, y[, z], rcs, v_r`` float32 rows.

    Objects and clutter are static in the world; poses map ego to world.
    """
    world_pts = []
    meta = []
    for box in boxes:
        n = 6 if box.class_id == ObjectClass.CAR else 3
        local = rng.uniform(-0.5, 0.5, size=(n, 3)) * np.array(box.size)
        c, s = math.cos(box.yaw), math.sin(box.yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        key_pts = local @ rot.T + np.array(box.center)
        world_pts.append(transform_points(key_pose, key_pts))
        meta.append(np.column_stack([rng.uniform(-5, 15, n), np.full(n, math.hypot(*box.velocity))]))
    bg = np.column_stack([rng.uniform(0, 60, clutter), rng.uniform(-30, 30, clutter), rng.uniform(0, 3, clutter)])
    world_pts.append(transform_points(key_pose, bg))
    meta.append(np.column_stack([rng.uniform(-15, 5, clutter), np.zeros(clutter)]))
    pts = transform_points(sweep_pose.inverse(), np.vstack(world_pts))
    extra = np.vstack(meta)
    if has_z:
        rows = np.column_stack([pts, extra])
    else:
        rows = np.column_stack([pts[:, :2], extra])
    return rows.astype("<f4")


def make_scene(
    out_dir,
    num_frames: int = 5,
    seed: int = 0,
    radar_dims: str = "3+1D",
    num_sweeps: int = 5,
    sweep_interval_us: int = 60_000,
    ego_speed: float = 10.0,
    with_camera: bool = True,
    feature_channels: int = 8,
    stride: int = 16,
) -> Path:
    """Write a synthetic dataset under ``out_dir`` and return its manifest path."""
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    camera = front_camera()
    has_z = radar_dims == "3+1D"
    bins = tuple(float(d) for d in np.arange(4.0, 52.0, 4.0))
    feat_h, feat_w = camera.height // stride, camera.width // stride
    frames = []
    for i in range(num_frames):
        frame_id = f"{i:06d}"
        key_ts = 1_000_000 + i * 500_000
        key_x = ego_speed * key_ts * 1e-6
        key_pose = Pose.from_yaw(0.0, (key_x, 0.0, 0.0))
        boxes = _place_objects(rng, camera)
        sweeps = []
        for k in range(num_sweeps):
            ts = key_ts - k * sweep_interval_us
            pose = Pose.from_yaw(0.0, (ego_speed * ts * 1e-6, 0.0, 0.0))
            blob = f"radar/{frame_id}_{k}.bin"
            pts = _radar_returns(rng, boxes, key_pose, pose, has_z)
            sweeps.append(RadarSweepRecord(ts, pose, blob, pts))
        cam_inputs = None
        if with_camera:
            feats = rng.random((feature_channels, feat_h, feat_w)).astype("<f4")
            logits = rng.normal(size=(len(bins), feat_h, feat_w))
            probs = np.exp(logits) / np.exp(logits).sum(axis=0, keepdims=True)
            write_tensor(out_dir / f"camera/{frame_id}_feat.rct", feats)
            write_tensor(out_dir / f"camera/{frame_id}_depth.rct", probs.astype("<f4"))
            cam_inputs = CameraInputs(f"camera/{frame_id}_feat.rct", f"camera/{frame_id}_depth.rct", bins, stride)
        frames.append(FrameRecord(
            frame_id=frame_id,
            timestamp=key_ts,
            ego_pose=key_pose,
            camera=camera,
            radar_dims=radar_dims,
            radar_sweeps=tuple(sweeps),
            annotations=tuple(boxes),
            camera_inputs=cam_inputs,
            root=out_dir,
        ))
    return write_frames(frames, out_dir)
