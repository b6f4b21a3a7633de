"""Frames, rigid transforms, pinhole projection and box corner geometry.

Conventions used throughout the package:

* Ego frame: x forward, y left, z up (meters).
* Camera frame: x right, y down, z along the optical axis.
* ``Box3D.center`` is the geometric center of the box; ``size`` is
  ``(length, width, height)`` with length measured along the heading.
* ``yaw`` is the heading about +z, zero along +x, counterclockwise, kept in
  ``(-pi, pi]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ORTHONORMAL_TOL = 1e-6


class ObjectClass(enum.IntEnum):
    PEDESTRIAN = 0
    CYCLIST = 1
    CAR = 2

    @classmethod
    def parse(cls, value) -> "ObjectClass":
        if isinstance(value, ObjectClass):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValueError(f"unknown class name {value!r}") from None
        return cls(int(value))

    @property
    def label(self) -> str:
        return self.name.lower()


NUM_CLASSES = len(ObjectClass)


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.remainder(yaw, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def yaw_rotation(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform ``p -> rotation @ p + translation``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        trans = np.array(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(rot @ rot.T, np.eye(3), atol=ORTHONORMAL_TOL):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("rotation determinant is not +1")
        rot.flags.writeable = False
        trans.flags.writeable = False
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(self.translation, other.translation)

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_yaw(cls, yaw: float, translation=(0.0, 0.0, 0.0)) -> "Pose":
        return cls(yaw_rotation(yaw), np.asarray(translation, dtype=np.float64))

    def inverse(self) -> "Pose":
        rot_t = self.rotation.T
        return Pose(rot_t, -rot_t @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """Return ``self ∘ other``: apply ``other`` first, then ``self``."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def apply(self, points) -> np.ndarray:
        return transform_points(self, points)

    def as_matrix(self) -> np.ndarray:
        mat = np.eye(4)
        mat[:3, :3] = self.rotation
        mat[:3, 3] = self.translation
        return mat


def transform_points(pose: Pose, points) -> np.ndarray:
    """Apply ``pose`` to an ``(N, 3)`` array (or a single 3-vector)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        return pose.rotation @ pts + pose.translation
    if pts.shape[0] == 0:
        return pts.reshape(0, 3).copy()
    return pts @ pose.rotation.T + pose.translation


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole camera; ``extrinsics`` maps ego coordinates to camera coordinates."""

    intrinsics: np.ndarray
    extrinsics: Pose
    width: int
    height: int

    def __post_init__(self):
        k = np.array(self.intrinsics, dtype=np.float64).reshape(3, 3)
        k.flags.writeable = False
        object.__setattr__(self, "intrinsics", k)
        fx, fy, cx, cy = k[0, 0], k[1, 1], k[0, 2], k[1, 2]
        if fx <= 0 or fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < cx < self.width and 0 < cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def __eq__(self, other):
        if not isinstance(other, CameraModel):
            return NotImplemented
        return (
            np.array_equal(self.intrinsics, other.intrinsics)
            and self.extrinsics == other.extrinsics
            and (self.width, self.height) == (other.width, other.height)
        )

    def __hash__(self):
        return hash((self.intrinsics.tobytes(), self.extrinsics, self.width, self.height))

    @property
    def fx(self) -> float:
        return float(self.intrinsics[0, 0])

    @property
    def fy(self) -> float:
        return float(self.intrinsics[1, 1])

    @property
    def cx(self) -> float:
        return float(self.intrinsics[0, 2])

    @property
    def cy(self) -> float:
        return float(self.intrinsics[1, 2])


def project_to_image(camera: CameraModel, points_ego) -> np.ndarray:
    """Project ego-frame points to pixels.

    Returns an ``(N, 4)`` array of ``(u, v, depth, valid)`` where ``valid`` is
    1.0 for points in front of the camera that land inside the closed image
    rectangle ``[0, width] x [0, height]`` and 0.0 otherwise. Invalid points
    are flagged rather than dropped.
    """
    pts = np.atleast_2d(np.asarray(points_ego, dtype=np.float64))
    cam = transform_points(camera.extrinsics, pts)
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        u = camera.fx * cam[:, 0] / z + camera.cx
        v = camera.fy * cam[:, 1] / z + camera.cy
    valid = (
        (z > 0)
        & np.isfinite(u)
        & np.isfinite(v)
        & (u >= 0)
        & (u <= camera.width)
        & (v >= 0)
        & (v <= camera.height)
    )
    return np.column_stack([u, v, z, valid.astype(np.float64)])


def unproject(camera: CameraModel, pixels, depths) -> np.ndarray:
    """Inverse of :func:`project_to_image`: pixels at given depths to ego frame."""
    uv = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    d = np.broadcast_to(np.asarray(depths, dtype=np.float64), (uv.shape[0],))
    homog = np.column_stack([uv, np.ones(uv.shape[0])])
    rays = homog @ np.linalg.inv(camera.intrinsics).T
    cam_pts = rays * d[:, None]
    return transform_points(camera.extrinsics.inverse(), cam_pts)


@dataclass(frozen=True)
class Box3D:
    center: tuple
    size: tuple
    yaw: float = 0.0
    velocity: tuple = (0.0, 0.0)
    class_id: ObjectClass = ObjectClass.CAR
    attribute_id: Optional[int] = None
    score: Optional[float] = None

    def __post_init__(self):
        center = tuple(float(c) for c in self.center)
        size = tuple(float(s) for s in self.size)
        velocity = tuple(float(v) for v in self.velocity)
        if len(center) != 3 or len(size) != 3 or len(velocity) != 2:
            raise ValueError("center and size must be 3-vectors, velocity a 2-vector")
        if min(size) <= 0:
            raise ValueError(f"box size must be positive, got {size}")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "velocity", velocity)
        object.__setattr__(self, "yaw", normalize_yaw(float(self.yaw)))
        object.__setattr__(self, "class_id", ObjectClass.parse(self.class_id))
        if self.score is not None:
            object.__setattr__(self, "score", float(self.score))

    @property
    def length(self) -> float:
        return self.size[0]

    @property
    def width(self) -> float:
        return self.size[1]

    @property
    def height(self) -> float:
        return self.size[2]

    @property
    def volume(self) -> float:
        return self.size[0] * self.size[1] * self.size[2]

    def to_dict(self) -> dict:
        out = {
            "center": list(self.center),
            "size": list(self.size),
            "yaw": self.yaw,
            "velocity": list(self.velocity),
            "class": self.class_id.label,
            "attribute": self.attribute_id,
        }
        if self.score is not None:
            out["score"] = self.score
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Box3D":
        return cls(
            center=data["center"],
            size=data["size"],
            yaw=data.get("yaw", 0.0),
            velocity=data.get("velocity", (0.0, 0.0)),
            class_id=ObjectClass.parse(data["class"]),
            attribute_id=data.get("attribute"),
            score=data.get("score"),
        )


def box_corners_bev(box: Box3D) -> np.ndarray:
    """Four BEV corners, counterclockwise starting at front-left."""
    half_l, half_w = box.length / 2.0, box.width / 2.0
    local = np.array(
        [[half_l, half_w], [-half_l, half_w], [-half_l, -half_w], [half_l, -half_w]]
    )
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array(box.center[:2])


def box_corners_3d(box: Box3D) -> np.ndarray:
    """Eight corners: bottom face (ccw) followed by top face in the same order."""
    bev = box_corners_bev(box)
    zc, half_h = box.center[2], box.height / 2.0
    bottom = np.column_stack([bev, np.full(4, zc - half_h)])
    top = np.column_stack([bev, np.full(4, zc + half_h)])
    return np.vstack([bottom, top])


@dataclass(frozen=True)
class GridConfig:
    """Axis-aligned BEV grid; rows index x, columns index y."""

    x_min: float = 0.0
    x_max: float = 51.2
    y_min: float = -25.6
    y_max: float = 25.6
    step: float = 0.1

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"grid step must be positive, got {self.step}")
        for name, span in (("x", self.x_max - self.x_min), ("y", self.y_max - self.y_min)):
            if span <= 0:
                raise ValueError(f"empty {name} range")
            cells = span / self.step
            if abs(cells - round(cells)) > 1e-9 * max(1.0, cells):
                raise ValueError(f"{name} range {span} is not a multiple of step {self.step}")

    @property
    def rows(self) -> int:
        return int(round((self.x_max - self.x_min) / self.step))

    @property
    def cols(self) -> int:
        return int(round((self.y_max - self.y_min) / self.step))

    @property
    def shape(self) -> tuple:
        return (self.rows, self.cols)

    def cell_indices(self, x, y) -> tuple:
        """Integer (row, col) of each coordinate plus an in-grid mask."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        rows = np.floor((x - self.x_min) / self.step)
        cols = np.floor((y - self.y_min) / self.step)
        inside = (rows >= 0) & (rows < self.rows) & (cols >= 0) & (cols < self.cols)
        inside &= np.isfinite(rows) & np.isfinite(cols)
        rows = np.where(inside, rows, 0).astype(np.int64)
        cols = np.where(inside, cols, 0).astype(np.int64)
        return rows, cols, inside

    def cell_center(self, row, col) -> tuple:
        return (
            self.x_min + (np.asarray(row) + 0.5) * self.step,
            self.y_min + (np.asarray(col) + 0.5) * self.step,
        )

    def contains(self, x: float, y: float) -> bool:
        return bool(self.cell_indices(x, y)[2])

