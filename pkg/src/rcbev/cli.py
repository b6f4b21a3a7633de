"""Command line front-end: ``rcbev {preprocess,eval,cbgs,render-targets,decode,fixture}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, PipelineConfig, load_config
from .dataset import DatasetError, boxes_from_json, cbgs_resample, load_frames
from .evaluation import evaluate_nuscenes, evaluate_vod, format_table, write_curves_csv
from .head import decode_detections, render_targets
from .pipeline import (
    ground_truth_boxes,
    preprocess_frame,
    read_head_outputs,
    write_frame_output,
    write_targets,
)
from .tensor_io import TensorFormatError, atomic_write_bytes

log = logging.getLogger("rcbev")


class CommandError(RuntimeError):
    pass


def _workers(cfg: PipelineConfig) -> int:
    return cfg.workers or os.cpu_count() or 1


def _map_frames(fn, items, workers: int):
    """Ordered map, in-process for one worker."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class _Preprocess:
    def __init__(self, cfg: PipelineConfig, out: Path):
        self.cfg, self.out = cfg, out

    def __call__(self, frame):
        output = preprocess_frame(frame, self.cfg)
        write_frame_output(self.out, output)
        return output.frame_id, output.counters, output.timings


def cmd_preprocess(cfg: PipelineConfig, dataset_path, out_path) -> int:
    out = Path(out_path)
    frames = sorted(load_frames(dataset_path), key=lambda f: f.frame_id)
    results = _map_frames(_Preprocess(cfg, out), frames, _workers(cfg))
    totals: dict = {}
    stage_time: dict = {}
    for frame_id, counters, timings in results:
        for k, v in counters.items():
            totals[k] = totals.get(k, 0) + v
        for k, v in timings.items():
            stage_time[k] = stage_time.get(k, 0.0) + v
    for stage, seconds in stage_time.items():
        print(f"  {stage:<14} {seconds * 1000:9.1f} ms")
    print("  " + "  ".join(f"{k}={v}" for k, v in totals.items()))
    summary = {"frames": [r[0] for r in results], "counters": totals}
    atomic_write_bytes(out / "summary.json", json.dumps(summary, indent=2).encode())
    print(f"preprocessed {len(results)} frames -> {out}")
    return 0


class _RenderTargets:
    def __init__(self, cfg: PipelineConfig, out: Path):
        self.cfg, self.out = cfg, out

    def __call__(self, frame):
        grid = self.cfg.grid_config
        boxes = ground_truth_boxes(frame, grid, self.cfg.eval.filter_fov, True)
        targets = render_targets(
            boxes, grid, min_overlap=self.cfg.head.min_overlap, min_radius=self.cfg.head.min_radius
        )
        write_targets(self.out / frame.frame_id, targets)
        return frame.frame_id, len(boxes)


def cmd_render_targets(cfg: PipelineConfig, dataset_path, out_path) -> int:
    out = Path(out_path)
    frames = sorted(load_frames(dataset_path), key=lambda f: f.frame_id)
    results = _map_frames(_RenderTargets(cfg, out), frames, _workers(cfg))
    print(f"rendered targets for {len(results)} frames ({sum(n for _, n in results)} objects) -> {out}")
    return 0


def cmd_decode(cfg: PipelineConfig, head_dir, out_path) -> int:
    """Decode ``<head_dir>/<frame_id>/{heatmap,regression}.rct`` into predictions JSON-lines."""
    head_dir = Path(head_dir)
    grid = cfg.grid_config
    lines = []
    total = 0
    for frame_dir in sorted(p for p in head_dir.iterdir() if (p / "heatmap.rct").exists()):
        heatmaps, regressions, attributes = read_head_outputs(frame_dir)
        dets = decode_detections(
            heatmaps, regressions, grid,
            score_threshold=cfg.head.score_threshold,
            max_detections=cfg.head.max_detections,
            nms_kernel=cfg.head.nms_kernel,
            attributes=attributes,
        )
        total += len(dets)
        lines.append(json.dumps({"frame_id": frame_dir.name, "boxes": [d.box.to_dict() for d in dets]}))
    atomic_write_bytes(Path(out_path), ("\n".join(lines) + "\n").encode())
    print(f"decoded {total} detections from {len(lines)} frames -> {out_path}")
    return 0


def read_predictions(path) -> dict:
    preds = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            data = json.loads(line)
            frame_id = data.get("frame_id")
            if frame_id is None:
                raise DatasetError(f"line {lineno}: missing", None, "frame_id")
            preds[frame_id] = list(boxes_from_json(data.get("boxes", []), frame_id, "boxes"))
    return preds


def cmd_eval(cfg: PipelineConfig, predictions_path, gt_path, out_path) -> int:
    out = Path(out_path)
    grid = cfg.grid_config
    gts, cameras = {}, {}
    for frame in load_frames(gt_path):
        gts[frame.frame_id] = ground_truth_boxes(frame, grid, cfg.eval.filter_fov, cfg.eval.filter_grid)
        cameras[frame.frame_id] = frame.camera
    preds = read_predictions(predictions_path)
    missing = sorted(set(gts) - set(preds))
    extra = sorted(set(preds) - set(gts))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"frames without predictions: {', '.join(missing)}")
        if extra:
            parts.append(f"predictions for unknown frames: {', '.join(extra)}")
        raise CommandError("; ".join(parts))
    preds = {fid: preds[fid] for fid in gts}

    if cfg.eval.protocol == "nuscenes":
        result = evaluate_nuscenes(preds, gts, tuple(cfg.eval.distance_thresholds), cfg.eval.tp_threshold)
    else:
        result = evaluate_vod(preds, gts, cameras, tuple(cfg.eval.variants), cfg.eval.iou_thresholds)

    atomic_write_bytes(out / "metrics.json", json.dumps(result.to_json(), indent=2).encode())
    for label, ce in result.per_class.items():
        for key, curve in ce.curves.items():
            atomic_write_bytes(out / "pr_curves" / f"{label}_{key}.csv", write_curves_csv(curve).encode())
    print(format_table(result))
    return 0


def cmd_cbgs(cfg: PipelineConfig, dataset_path, out_path) -> int:
    frames = list(load_frames(dataset_path))
    indices = cbgs_resample(frames, cfg.cbgs.build(), cfg.seed)
    doc = {"frame_ids": [frames[i].frame_id for i in indices], "indices": indices}
    atomic_write_bytes(Path(out_path), json.dumps(doc).encode())
    print(f"cbgs: {len(frames)} frames -> {len(indices)} samples -> {out_path}")
    return 0


def cmd_fixture(out_path, frames: int, seed: int, radar_dims: str) -> int:
    from .synthetic import make_scene

    manifest = make_scene(out_path, num_frames=frames, seed=seed, radar_dims=radar_dims)
    print(f"wrote {frames} synthetic frames -> {manifest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rcbev", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML pipeline config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--workers", type=int, help="worker processes (default: all cores)")
        p.add_argument("--out", required=True, help="output path")

    p = sub.add_parser("preprocess", help="fused BEV tensors and target maps per frame")
    common(p)
    p.add_argument("dataset")
    p = sub.add_parser("eval", help="AP / TP-error metrics for a predictions file")
    common(p)
    p.add_argument("predictions")
    p.add_argument("ground_truth", help="dataset manifest holding annotations")
    p = sub.add_parser("cbgs", help="class-balanced frame index list")
    common(p)
    p.add_argument("dataset")
    p = sub.add_parser("render-targets", help="heatmap/regression targets per frame")
    common(p)
    p.add_argument("dataset")
    p = sub.add_parser("decode", help="head outputs to predictions JSON-lines")
    common(p)
    p.add_argument("head_outputs", help="directory of <frame_id>/heatmap.rct, regression.rct")
    p = sub.add_parser("fixture", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radar-dims", choices=("3+1D", "2+1D"), default="3+1D")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    start = time.perf_counter()
    try:
        if args.command == "fixture":
            return cmd_fixture(args.out, args.frames, args.seed, args.radar_dims)
        cfg = load_config(args.config, seed=args.seed, workers=args.workers)
        if args.command == "preprocess":
            status = cmd_preprocess(cfg, args.dataset, args.out)
        elif args.command == "eval":
            status = cmd_eval(cfg, args.predictions, args.ground_truth, args.out)
        elif args.command == "cbgs":
            status = cmd_cbgs(cfg, args.dataset, args.out)
        elif args.command == "render-targets":
            status = cmd_render_targets(cfg, args.dataset, args.out)
        else:
            status = cmd_decode(cfg, args.head_outputs, args.out)
    except (ConfigError, DatasetError, TensorFormatError, CommandError, ValueError, OSError) as exc:
        print(f"rcbev {args.command}: error: {exc}", file=sys.stderr)
        return 2
    log.debug("%s finished in %.2fs", args.command, time.perf_counter() - start)
    return status


if __name__ == "__main__":
    sys.exit(main())
