"""KITTI-style detection evaluation."""

from __future__ import annotations

from pathlib import Path

from ..geometry import boxes_to_array
from ..synthdata import read_labels
from .metrics import (
    EvalConfig,
    EvalRecord,
    average_precision,
    evaluate_frames,
    lookup_ap,
    match_frame,
    record_lines,
    summary_table,
)


def evaluate(detection_dir, gt_dir, cfg: EvalConfig | None = None):
    """Evaluate detection label files against ground-truth label files.

    Both directories hold ``<frame>.label`` files in the standard text
    format; frames are paired by filename stem (a frame with no detection
    file counts as empty). Returns the per-class/metric/bucket records.
    """
    cfg = cfg or EvalConfig()
    det_dir = Path(detection_dir)
    gt_dir = Path(gt_dir)
    gt_files = sorted(gt_dir.glob("*.label"))
    if not gt_files:
        raise FileNotFoundError(f"no .label files under {gt_dir}")
    dets, gts = {}, {}
    for gt_path in gt_files:
        fid = gt_path.stem
        gts[fid] = boxes_to_array(read_labels(gt_path))
        det_path = det_dir / gt_path.name
        dets[fid] = boxes_to_array(read_labels(det_path)) \
            if det_path.is_file() else boxes_to_array([])
    return evaluate_frames(dets, gts, cfg)


__all__ = [
    "EvalConfig",
    "EvalRecord",
    "average_precision",
    "evaluate",
    "evaluate_frames",
    "lookup_ap",
    "match_frame",
    "record_lines",
    "summary_table",
]
