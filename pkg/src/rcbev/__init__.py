"""Deterministic core of a radar-camera BEV fusion detector and its evaluation."""

from .geometry import Box3D, CameraModel, GridConfig, ObjectClass, Pose

__version__ = "0.1.0"

__all__ = ["Box3D", "CameraModel", "GridConfig", "ObjectClass", "Pose", "__version__"]
