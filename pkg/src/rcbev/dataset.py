"""Canonical frame manifest, ingestion-side preprocessing and class-balanced resampling.

A dataset is a directory holding ``manifest.jsonl`` (one JSON object per
frame) next to the binary files it references by relative path. Radar
blobs are raw little-endian float32 with per-point columns
``x, y[, z], rcs, v_r``. Camera features and depth distributions are
tensor files (see :mod:`rcbev.tensor_io`).
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .camera_bev import DepthDistribution, ImageFeatureMap
from .geometry import Box3D, CameraModel, ObjectClass, Pose, project_to_image
from .pillars import Sweep
from .tensor_io import atomic_write_bytes, read_tensor

MANIFEST_NAME = "manifest.jsonl"
RADAR_DIMS = {"2+1D": 4, "3+1D": 5}


class DatasetError(ValueError):
    def __init__(self, message: str, frame_id: Optional[str] = None, field_name: Optional[str] = None):
        self.frame_id = frame_id
        self.field_name = field_name
        where = []
        if frame_id is not None:
            where.append(f"frame {frame_id!r}")
        if field_name is not None:
            where.append(f"field {field_name!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class RadarSweepRecord:
    timestamp: int  # microseconds
    ego_pose: Pose
    blob: str
    points: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class CameraInputs:
    """References to precomputed image features and depth distributions."""

    features: str
    depth: str
    bin_depths: tuple
    stride: int = 1


@dataclass(frozen=True)
class FrameRecord:
    frame_id: str
    timestamp: int  # microseconds
    ego_pose: Pose
    camera: CameraModel
    radar_dims: str
    radar_sweeps: tuple
    annotations: tuple
    camera_inputs: Optional[CameraInputs] = None
    root: Optional[Path] = field(default=None, compare=False, repr=False)

    @property
    def has_z(self) -> bool:
        return self.radar_dims == "3+1D"

    def sweeps(self) -> list:
        """Sweeps newest first with times in seconds, ready for accumulation."""
        ordered = sorted(self.radar_sweeps, key=lambda s: -s.timestamp)
        return [Sweep(s.points, s.ego_pose, s.timestamp * 1e-6) for s in ordered]

    def load_camera_inputs(self, default_bins=None) -> Optional[tuple]:
        """``(ImageFeatureMap, DepthDistribution)`` or ``None`` without camera inputs.

        ``default_bins`` applies when the manifest gives no bin depths.
        """
        if self.camera_inputs is None:
            return None
        ci = self.camera_inputs
        bins = np.array(ci.bin_depths) if ci.bin_depths else np.asarray(default_bins)
        feats = read_tensor(self.root / ci.features)
        probs = read_tensor(self.root / ci.depth)
        return ImageFeatureMap(feats, ci.stride), DepthDistribution(probs, bins)


# ---------------------------------------------------------------- JSON codecs

def pose_to_json(pose: Pose) -> dict:
    return {"rotation": pose.rotation.tolist(), "translation": pose.translation.tolist()}


def pose_from_json(data, frame_id=None, name="pose") -> Pose:
    try:
        return Pose(np.array(data["rotation"], dtype=np.float64), np.array(data["translation"], dtype=np.float64))
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"malformed pose ({exc})", frame_id, name) from None
    except ValueError as exc:
        raise DatasetError(str(exc), frame_id, name) from None


def camera_to_json(camera: CameraModel) -> dict:
    return {
        "intrinsics": camera.intrinsics.tolist(),
        "extrinsics": pose_to_json(camera.extrinsics),
        "width": camera.width,
        "height": camera.height,
    }


def camera_from_json(data, frame_id=None) -> CameraModel:
    if not isinstance(data, dict):
        raise DatasetError("camera must be an object", frame_id, "camera")
    for key in ("intrinsics", "extrinsics", "width", "height"):
        if key not in data:
            raise DatasetError("missing", frame_id, f"camera.{key}")
    try:
        return CameraModel(
            np.array(data["intrinsics"], dtype=np.float64),
            pose_from_json(data["extrinsics"], frame_id, "camera.extrinsics"),
            int(data["width"]),
            int(data["height"]),
        )
    except DatasetError:
        raise
    except (TypeError, ValueError) as exc:
        raise DatasetError(str(exc), frame_id, "camera.intrinsics") from None


def boxes_from_json(items, frame_id=None, name="annotations") -> tuple:
    out = []
    for i, item in enumerate(items):
        try:
            out.append(Box3D.from_dict(item))
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"bad box #{i} ({exc})", frame_id, name) from None
    return tuple(out)


def read_blob(path: Path, radar_dims: str, frame_id=None) -> np.ndarray:
    try:
        raw = np.fromfile(path, dtype="<f4")
    except OSError as exc:
        raise DatasetError(f"cannot read blob ({exc})", frame_id, "radar_sweeps.blob") from None
    width = RADAR_DIMS[radar_dims]
    if raw.shape[0] % width:
        raise DatasetError(
            f"blob {path.name} holds {raw.shape[0]} floats, not a multiple of the "
            f"{radar_dims} record size {width}",
            frame_id,
            "radar_sweeps.blob",
        )
    return raw.reshape(-1, width)


def frame_from_json(data: dict, root: Path) -> FrameRecord:
    frame_id = data.get("frame_id")
    if not isinstance(frame_id, str):
        raise DatasetError("missing or non-string", None, "frame_id")
    for key in ("timestamp", "ego_pose", "camera", "radar_dims"):
        if key not in data:
            raise DatasetError("missing", frame_id, key)
    radar_dims = data["radar_dims"]
    if radar_dims not in RADAR_DIMS:
        raise DatasetError(f"must be one of {sorted(RADAR_DIMS)}", frame_id, "radar_dims")
    timestamp = int(data["timestamp"])
    sweeps = []
    for sw in data.get("radar_sweeps", []):
        try:
            ts, blob = int(sw["timestamp"]), str(sw["blob"])
        except (KeyError, TypeError, ValueError):
            raise DatasetError("sweep needs timestamp and blob", frame_id, "radar_sweeps") from None
        if ts > timestamp:
            raise DatasetError("sweep newer than the frame", frame_id, "radar_sweeps.timestamp")
        pose = pose_from_json(sw.get("ego_pose"), frame_id, "radar_sweeps.ego_pose")
        sweeps.append(RadarSweepRecord(ts, pose, blob, read_blob(root / blob, radar_dims, frame_id)))
    cam_inputs = None
    if data.get("camera_inputs") is not None:
        ci = data["camera_inputs"]
        try:
            cam_inputs = CameraInputs(
                str(ci["features"]), str(ci["depth"]),
                tuple(float(d) for d in ci.get("bin_depths", ())), int(ci.get("stride", 1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"malformed ({exc})", frame_id, "camera_inputs") from None
    return FrameRecord(
        frame_id=frame_id,
        timestamp=timestamp,
        ego_pose=pose_from_json(data["ego_pose"], frame_id, "ego_pose"),
        camera=camera_from_json(data["camera"], frame_id),
        radar_dims=radar_dims,
        radar_sweeps=tuple(sweeps),
        annotations=boxes_from_json(data.get("annotations", []), frame_id),
        camera_inputs=cam_inputs,
        root=root,
    )


def frame_to_json(frame: FrameRecord) -> dict:
    out = {
        "frame_id": frame.frame_id,
        "timestamp": frame.timestamp,
        "ego_pose": pose_to_json(frame.ego_pose),
        "camera": camera_to_json(frame.camera),
        "radar_dims": frame.radar_dims,
        "radar_sweeps": [
            {"timestamp": s.timestamp, "ego_pose": pose_to_json(s.ego_pose), "blob": s.blob}
            for s in frame.radar_sweeps
        ],
        "annotations": [b.to_dict() for b in frame.annotations],
    }
    if frame.camera_inputs is not None:
        ci = frame.camera_inputs
        out["camera_inputs"] = {
            "features": ci.features, "depth": ci.depth,
            "bin_depths": list(ci.bin_depths), "stride": ci.stride,
        }
    return out


# ------------------------------------------------------------------ load/write

def manifest_path(path) -> Path:
    path = Path(path)
    return path / MANIFEST_NAME if path.is_dir() else path


def load_frames(path) -> Iterator[FrameRecord]:
    """Yield validated frames from a manifest file or dataset directory."""
    manifest = manifest_path(path)
    root = manifest.parent
    with open(manifest, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            yield frame_from_json(data, root)


def write_frames(frames: Sequence[FrameRecord], out_dir) -> Path:
    """Write frames (blobs, referenced tensors and manifest) under ``out_dir``."""
    out_dir = Path(out_dir)
    lines = []
    for frame in frames:
        for sweep in frame.radar_sweeps:
            blob = np.ascontiguousarray(sweep.points, dtype="<f4").tobytes()
            atomic_write_bytes(out_dir / sweep.blob, blob)
        if frame.camera_inputs is not None and frame.root is not None:
            for rel in (frame.camera_inputs.features, frame.camera_inputs.depth):
                src, dst = frame.root / rel, out_dir / rel
                if src.resolve() != dst.resolve():
                    dst.parent.mkdir(parents=True, exist_ok=True)
                    shutil.copyfile(src, dst)
        lines.append(json.dumps(frame_to_json(frame)))
    target = out_dir / MANIFEST_NAME
    atomic_write_bytes(target, ("\n".join(lines) + "\n").encode("utf-8"))
    return target


# --------------------------------------------------------------- preprocessing

def filter_fov(boxes: Sequence[Box3D], camera: CameraModel) -> list:
    """Keep boxes whose center projects inside the image with positive depth."""
    if not boxes:
        return []
    centers = np.array([b.center for b in boxes])
    valid = project_to_image(camera, centers)[:, 3] > 0
    return [b for b, ok in zip(boxes, valid) if ok]


def compensate_radial_velocity(raw_v_r: float, point_position, ego_velocity, sensor_position=(0.0, 0.0, 0.0)) -> float:
    """Remove the ego motion's share from a Doppler measurement.

    A static target seen from a sensor moving with ``ego_velocity`` appears
    to approach at ``dot(ego_velocity, line_of_sight)``; adding that back
    leaves the target's own radial motion.
    """
    los = np.asarray(point_position, dtype=np.float64) - np.asarray(sensor_position, dtype=np.float64)
    norm = np.linalg.norm(los)
    if norm == 0:
        return float(raw_v_r)
    return float(raw_v_r + np.dot(np.asarray(ego_velocity, dtype=np.float64), los / norm))


@dataclass(frozen=True)
class ClassGroupConfig:
    """Partition of the classes into sampling groups.

    ``temperature`` scales how hard groups are equalized: the duplication
    factor of a group is ``(n_max / n_group) ** temperature``.
    """

    groups: tuple = tuple((c.label,) for c in ObjectClass)
    temperature: float = 1.0
    max_factor: float = 5.0

    def __post_init__(self):
        groups = tuple(tuple(ObjectClass.parse(c).label for c in g) for g in self.groups)
        flat = [c for g in groups for c in g]
        expected = sorted(c.label for c in ObjectClass)
        if sorted(flat) != expected:
            raise ValueError(f"class groups {groups} do not partition {expected}")
        if self.max_factor < 1:
            raise ValueError("max_factor must be >= 1")
        object.__setattr__(self, "groups", groups)

    def group_of(self, cls: ObjectClass) -> int:
        label = ObjectClass.parse(cls).label
        for i, g in enumerate(self.groups):
            if label in g:
                return i
        raise KeyError(label)


def _frame_classes(frame) -> set:
    if isinstance(frame, FrameRecord):
        return {b.class_id for b in frame.annotations}
    return {ObjectClass.parse(c) for c in frame}


def cbgs_factors(frames: Sequence, groups: ClassGroupConfig = ClassGroupConfig()) -> np.ndarray:
    """Per-frame duplication factor (>= 1) from group frame counts."""
    frame_groups = [{groups.group_of(c) for c in _frame_classes(f)} for f in frames]
    counts = np.zeros(len(groups.groups))
    for gs in frame_groups:
        for g in gs:
            counts[g] += 1
    if not counts.any():
        return np.ones(len(frames))
    n_max = counts.max()
    group_factor = np.ones_like(counts)
    nz = counts > 0
    group_factor[nz] = np.minimum((n_max / counts[nz]) ** groups.temperature, groups.max_factor)
    return np.array([max([group_factor[g] for g in gs], default=1.0) for gs in frame_groups])


def cbgs_resample(frames: Sequence, groups: ClassGroupConfig = ClassGroupConfig(), seed: int = 0) -> list:
    """Frame indices with rare-group frames duplicated.

    ``frames`` are :class:`FrameRecord` objects or plain iterables of class
    labels. Each index appears ``floor(f)`` times plus once more with
    probability ``frac(f)``; indices stay in ascending order so a balanced
    input maps to the identity list.
    """
    if len(frames) == 0:
        return []
    factors = cbgs_factors(frames, groups)
    rng = np.random.default_rng(seed)
    whole = np.floor(factors).astype(np.int64)
    extra = rng.random(len(frames)) < (factors - whole)
    reps = whole + extra.astype(np.int64)
    return np.repeat(np.arange(len(frames)), reps).tolist()
