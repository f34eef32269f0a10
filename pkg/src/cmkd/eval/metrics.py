"""Detection evaluation: greedy matching, interpolated AP, range buckets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import iou_3d_matrix, iou_bev_matrix

RANGE_BUCKETS = (("overall", 0.0, None), ("0-30m", 0.0, 30.0),
                 ("30-50m", 30.0, 50.0))


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation protocol parameters."""

    iou_threshold: float = 0.5
    class_thresholds: dict = field(default_factory=dict)
    recall_positions: int = 40
    max_range: float = 60.0

    def __post_init__(self):
        ths = dict(self.class_thresholds)
        ths.setdefault(None, self.iou_threshold)
        for t in ths.values():
            if not 0.0 < t <= 1.0:
                raise ValueError("IoU thresholds must be in (0, 1]")
        if self.recall_positions < 1:
            raise ValueError("recall_positions must be >= 1")
        object.__setattr__(self, "class_thresholds", ths)

    def threshold_for(self, class_id: int) -> float:
        return self.class_thresholds.get(class_id,
                                         self.class_thresholds[None])


def _bev_range(rows: np.ndarray) -> np.ndarray:
    return np.hypot(rows[:, 0], rows[:, 1])


def match_frame(detections: np.ndarray, gts: np.ndarray, threshold: float,
                metric: str = "3d", gt_ignored: np.ndarray | None = None):
    """Greedy per-frame matching.

    detections: (D, 9) rows already sorted by descending score; gts: (G, 9)
    rows. Each detection claims the unmatched ground truth of highest IoU
    >= threshold; every ground truth matches at most once. Ignored ground
    truths (optional mask) absorb detections without producing TPs or FPs.

    Returns (tp (D,) bool, fp (D,) bool, gt_matched (G,) bool); a detection
    that is neither TP nor FP was absorbed by an ignored ground truth.
    """
    detections = np.asarray(detections, np.float64).reshape(-1, 9)
    gts = np.asarray(gts, np.float64).reshape(-1, 9)
    d, g = len(detections), len(gts)
    tp = np.zeros(d, np.bool_)
    fp = np.zeros(d, np.bool_)
    gt_matched = np.zeros(g, np.bool_)
    if gt_ignored is None:
        gt_ignored = np.zeros(g, np.bool_)
    if d == 0:
        return tp, fp, gt_matched
    if g == 0:
        fp[:] = True
        return tp, fp, gt_matched
    iou_fn = iou_3d_matrix if metric == "3d" else iou_bev_matrix
    ious = iou_fn(detections, gts)
    for i in range(d):
        row = ious[i].copy()
        row[gt_matched] = -1.0
        j = int(np.argmax(row))
        if row[j] >= threshold:
            gt_matched[j] = True
            if gt_ignored[j]:
                continue            # absorbed, neither TP nor FP
            tp[i] = True
        else:
            fp[i] = True
    return tp, fp, gt_matched


def average_precision(tp_flags: np.ndarray, fp_flags: np.ndarray,
                      sort_keys: list[tuple], n_gt: int,
                      recall_positions: int = 40):
    """N-point interpolated AP.

    sort_keys: one (negative score, frame id, detection index) tuple per
    detection for a deterministic global ordering. Returns the mean over
    recall positions r in {1/N, ..., 1} of the maximum precision at recall
    >= r, or None when there is no ground truth (distinct from 0).
    """
    if n_gt == 0:
        return None
    tp_flags = np.asarray(tp_flags, np.bool_)
    fp_flags = np.asarray(fp_flags, np.bool_)
    order = sorted(range(len(sort_keys)), key=lambda i: sort_keys[i])
    tp = tp_flags[order]
    fp = fp_flags[order]
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(fp)
    denom = np.maximum(cum_tp + cum_fp, 1)
    precision = cum_tp / denom
    recall = cum_tp / n_gt
    n = recall_positions
    ap = 0.0
    for k in range(1, n + 1):
        r = k / n
        at = precision[recall >= r]
        ap += float(at.max()) if len(at) else 0.0
    return ap / n


@dataclass
class EvalRecord:
    class_id: int
    metric: str            # "3d" | "bev"
    bucket: str
    ap: float | None       # None means no ground truth in the bucket
    n_gt: int


def evaluate_frames(detections_by_frame: dict, gts_by_frame: dict,
                    cfg: EvalConfig) -> list[EvalRecord]:
    """Evaluate 3D AP and BEV AP per class and range bucket.

    Both dicts map frame id -> (N, 9) box rows (detections carry predicted
    scores). Boxes beyond cfg.max_range are dropped outright; inside a
    bucket, out-of-bucket ground truths are ignored (they absorb matching
    detections), mirroring the usual filtered-evaluation protocol.
    """
    frames = sorted(set(detections_by_frame) | set(gts_by_frame))
    class_ids = set()
    for fid in frames:
        for rows in (detections_by_frame.get(fid), gts_by_frame.get(fid)):
            if rows is not None and len(rows):
                class_ids.update(np.asarray(rows)[:, 7].astype(int).tolist())
    records = []
    for class_id in sorted(class_ids):
        thr = cfg.threshold_for(class_id)
        for metric in ("3d", "bev"):
            for bucket, lo, hi in RANGE_BUCKETS:
                hi_eff = cfg.max_range if hi is None else min(hi, cfg.max_range)
                tps, fps, keys = [], [], []
                n_gt = 0
                for fid in frames:
                    dets = np.asarray(detections_by_frame.get(
                        fid, np.zeros((0, 9))), np.float64).reshape(-1, 9)
                    gts = np.asarray(gts_by_frame.get(
                        fid, np.zeros((0, 9))), np.float64).reshape(-1, 9)
                    dets = dets[dets[:, 7].astype(int) == class_id]
                    gts = gts[gts[:, 7].astype(int) == class_id]
                    dets = dets[_bev_range(dets) <= cfg.max_range]
                    gts = gts[_bev_range(gts) <= cfg.max_range]
                    drange = _bev_range(dets)
                    grange = _bev_range(gts)
                    din = (drange >= lo) & (drange < hi_eff)
                    gin = (grange >= lo) & (grange < hi_eff)
                    dets = dets[din]
                    order = np.argsort(-dets[:, 8], kind="stable")
                    dets = dets[order]
                    tp, fp, _ = match_frame(dets, gts, thr, metric,
                                            gt_ignored=~gin)
                    n_gt += int(gin.sum())
                    tps.extend(tp.tolist())
                    fps.extend(fp.tolist())
                    keys.extend((-float(dets[i, 8]), str(fid), int(i))
                                for i in range(len(dets)))
                ap = average_precision(np.array(tps, bool),
                                       np.array(fps, bool), keys, n_gt,
                                       cfg.recall_positions)
                records.append(EvalRecord(class_id=class_id, metric=metric,
                                          bucket=bucket, ap=ap, n_gt=n_gt))
    return records


def record_lines(records: list[EvalRecord]) -> str:
    """Line-delimited report: ``class metric range_bucket value``."""
    lines = []
    for r in records:
        val = "NA" if r.ap is None else f"{r.ap:.6f}"
        lines.append(f"{r.class_id} {r.metric} {r.bucket} {val}")
    return "\n".join(lines) + "\n"


def summary_table(records: list[EvalRecord]) -> str:
    """Human-readable summary."""
    header = f"{'class':>5} {'metric':>6} {'bucket':>8} {'AP':>8} {'#gt':>6}"
    rows = [header, "-" * len(header)]
    for r in records:
        val = "    NA" if r.ap is None else f"{r.ap:8.4f}"
        rows.append(f"{r.class_id:>5} {r.metric:>6} {r.bucket:>8} "
                    f"{val} {r.n_gt:>6}")
    return "\n".join(rows) + "\n"


def lookup_ap(records: list[EvalRecord], metric: str = "3d",
              bucket: str = "overall", class_id: int | None = None):
    """Pull one AP value out of a record list (first matching class when
    class_id is None)."""
    for r in records:
        if r.metric == metric and r.bucket == bucket and (
                class_id is None or r.class_id == class_id):
            return r.ap
    raise KeyError(f"no record for metric={metric} bucket={bucket} "
                   f"class={class_id}")
