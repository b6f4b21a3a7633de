"""Pipeline configuration: one YAML file, validated, unknown keys rejected."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .dataset import ClassGroupConfig
from .geometry import GridConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSection(_Strict):
    x_min: float = 0.0
    x_max: float = 51.2
    y_min: float = -25.6
    y_max: float = 25.6
    step: float = 0.1

    @model_validator(mode="after")
    def _check(self):
        self.build()
        return self

    def build(self) -> GridConfig:
        return GridConfig(self.x_min, self.x_max, self.y_min, self.y_max, self.step)


class RadarSection(_Strict):
    num_sweeps: int = Field(5, ge=1)
    max_points_per_pillar: int = Field(32, ge=1)
    max_pillars: int = Field(8192, ge=1)
    out_channels: int = Field(64, ge=1)
    weights: Optional[str] = None


class DepthBins(_Strict):
    start: float = Field(1.0, gt=0)
    stop: float = 60.0
    step: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if self.stop < self.start:
            raise ValueError("depth bin stop must be >= start")
        return self


class CameraSection(_Strict):
    channels: int = Field(80, ge=0)
    depth_bins: DepthBins = DepthBins()


class HeadSection(_Strict):
    min_overlap: float = Field(0.1, gt=0, lt=1)
    min_radius: int = Field(2, ge=0)
    score_threshold: float = Field(0.1, ge=0, le=1)
    max_detections: int = Field(500, ge=1)
    nms_kernel: int = Field(3, ge=1)

    @model_validator(mode="after")
    def _odd(self):
        if self.nms_kernel % 2 == 0:
            raise ValueError("nms_kernel must be odd")
        return self


class EvalSection(_Strict):
    protocol: Literal["nuscenes", "vod"] = "nuscenes"
    distance_thresholds: List[float] = [0.5, 1.0, 2.0, 4.0]
    tp_threshold: float = 2.0
    iou_thresholds: Dict[str, float] = {"pedestrian": 0.25, "cyclist": 0.25, "car": 0.5}
    variants: List[Literal["2d", "bev", "3d"]] = ["2d", "bev", "3d"]
    filter_fov: bool = True
    filter_grid: bool = True


class CbgsSection(_Strict):
    groups: List[List[str]] = [["pedestrian"], ["cyclist"], ["car"]]
    temperature: float = Field(1.0, ge=0)
    max_factor: float = Field(5.0, ge=1)

    def build(self) -> ClassGroupConfig:
        return ClassGroupConfig(tuple(tuple(g) for g in self.groups), self.temperature, self.max_factor)

    @model_validator(mode="after")
    def _check(self):
        self.build()
        return self


class PipelineConfig(_Strict):
    seed: int = 0
    workers: Optional[int] = Field(None, ge=1)
    grid: GridSection = GridSection()
    radar: RadarSection = RadarSection()
    camera: CameraSection = CameraSection()
    head: HeadSection = HeadSection()
    eval: EvalSection = EvalSection()
    cbgs: CbgsSection = CbgsSection()

    @property
    def grid_config(self) -> GridConfig:
        return self.grid.build()


class ConfigError(ValueError):
    pass


def load_config(path: Optional[str | Path] = None, **overrides) -> PipelineConfig:
    data = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
