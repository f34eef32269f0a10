"""Anchor assignment and the response (detection) loss.

The same machinery supervises the teacher on hard labels and the student on
soft labels: positives regress encoded deltas weighted by the label
confidence, and the classification target of a positive anchor is the BEV
IoU between the currently decoded box and its matched label, so sigmoid
scores learn to be IoU-aware.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .. import kernels
from ..geometry import bev_view
from ..netblocks import AnchorGrid
from .losses import qfl, smooth_l1

POS_IOU = 0.6
NEG_IOU = 0.45


@dataclass
class AnchorAssignment:
    """Per-frame anchor supervision targets."""

    n_anchors: int
    fg_idx: np.ndarray            # (P,) int64 anchor indices
    fg_deltas: np.ndarray         # (P, 8) float32 encoded targets
    fg_boxes: np.ndarray          # (P, 7) float64 matched label boxes
    fg_weight: np.ndarray         # (P,) float32 confidence weights
    ignore_idx: np.ndarray        # (I,) int64 anchors excluded from cls

    @property
    def n_positive(self) -> int:
        return len(self.fg_idx)


def _candidate_anchor_indices(anchors: AnchorGrid, label: np.ndarray):
    """Anchor indices whose cells lie near a label footprint (others have
    zero overlap by construction, so IoU is only evaluated here)."""
    grid = anchors.grid
    nx, ny, _ = grid.counts
    ox, oy, _ = grid.origin
    vx, vy, _ = grid.voxel_size
    reach = 0.5 * float(np.hypot(label[4], label[5])) \
        + 0.5 * float(anchors.diag.max()) + 0.25
    x0 = max(0, int((label[0] - reach - ox) / vx))
    x1 = min(nx - 1, int((label[0] + reach - ox) / vx))
    y0 = max(0, int((label[1] - reach - oy) / vy))
    y1 = min(ny - 1, int((label[1] + reach - oy) / vy))
    if x1 < x0 or y1 < y0:
        return np.zeros(0, np.int64)
    ix, iy = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1),
                         indexing="ij")
    cell = (ix * ny + iy).ravel()
    per_plane = [cell + p * nx * ny for p in range(anchors.n_planes)]
    return np.concatenate(per_plane)


def assign_anchors(labels: np.ndarray, anchors: AnchorGrid,
                   use_confidence_weight: bool = True) -> AnchorAssignment:
    """Match labels to anchors.

    labels: (M, 9) rows (x, y, z, h, w, l, yaw, class_id, score); the score
    column carries the soft-label confidence (1.0 for hard labels). An
    anchor is positive at BEV IoU >= 0.6 to some label of its class,
    negative below 0.45, ignored in between; every label force-matches its
    best anchor.
    """
    labels = np.asarray(labels, np.float64).reshape(-1, 9)
    n = len(anchors)
    if len(labels) == 0:
        return AnchorAssignment(
            n_anchors=n, fg_idx=np.zeros(0, np.int64),
            fg_deltas=np.zeros((0, 8), np.float32),
            fg_boxes=np.zeros((0, 7)), fg_weight=np.zeros(0, np.float32),
            ignore_idx=np.zeros(0, np.int64))

    best_iou = np.zeros(n)
    best_label = np.full(n, -1, np.int64)
    label_best_iou = np.zeros(len(labels))
    label_best_anchor = np.full(len(labels), -1, np.int64)

    for m, label in enumerate(labels):
        cand = _candidate_anchor_indices(anchors, label)
        if len(cand):
            cand = cand[anchors.class_of_anchor[cand] == int(label[7])]
        if len(cand) == 0:
            continue
        ious = kernels.iou_bev_matrix(
            bev_view(label[None, :7]),
            np.ascontiguousarray(anchors.boxes[cand, :][:, [0, 1, 4, 5, 6]]),
        )[0]
        upd = ious > best_iou[cand]
        best_iou[cand[upd]] = ious[upd]
        best_label[cand[upd]] = m
        k = int(np.argmax(ious))
        label_best_iou[m] = ious[k]
        label_best_anchor[m] = cand[k]

    pos_mask = best_iou >= POS_IOU
    ignore_mask = (best_iou >= NEG_IOU) & ~pos_mask

    # force-match each label's best anchor, higher-IoU labels first
    for m in np.argsort(-label_best_iou):
        a = label_best_anchor[m]
        if a < 0 or pos_mask[a]:
            continue
        pos_mask[a] = True
        ignore_mask[a] = False
        best_label[a] = m

    fg_idx = np.flatnonzero(pos_mask).astype(np.int64)
    matched = labels[best_label[fg_idx]]
    fg_boxes = matched[:, :7]
    fg_deltas = anchors.encode(fg_boxes, fg_idx).astype(np.float32)
    if use_confidence_weight:
        fg_weight = matched[:, 8].astype(np.float32)
    else:
        fg_weight = np.ones(len(fg_idx), np.float32)
    return AnchorAssignment(
        n_anchors=n, fg_idx=fg_idx, fg_deltas=fg_deltas, fg_boxes=fg_boxes,
        fg_weight=fg_weight,
        ignore_idx=np.flatnonzero(ignore_mask).astype(np.int64))


def quality_targets(decoded: np.ndarray, matched: np.ndarray) -> np.ndarray:
    """BEV IoU between decoded predictions and their matched boxes, (P,)."""
    decoded = np.asarray(decoded, np.float64).reshape(-1, 7)
    matched = np.asarray(matched, np.float64).reshape(-1, 7)
    if len(decoded) == 0:
        return np.zeros(0)
    ious = kernels.iou_bev_matrix(bev_view(decoded), bev_view(matched))
    return np.ascontiguousarray(np.diagonal(ious))


def detection_loss(cls_logits: torch.Tensor, box_deltas: torch.Tensor,
                   assignments: list[AnchorAssignment], anchors: AnchorGrid,
                   beta: float = 2.0, cls_target_mode: str = "quality"):
    """Confidence-weighted detection loss over a batch.

    cls_logits: (B, N), box_deltas: (B, N, 8). Positive anchors contribute
    smooth-L1 on their 8 deltas times their confidence weight; every
    non-ignored anchor contributes quality focal loss whose target is the
    decoded-vs-label BEV IoU for positives (constant, no gradient) and 0
    for background, weighted by the confidence for positives and 1 for
    background. Both terms normalize by the batch positive count.

    Returns (total, parts) with parts = {"reg": ..., "cls": ...}.
    """
    if cls_target_mode not in ("quality", "one"):
        raise ValueError(f"bad cls_target_mode {cls_target_mode!r}")
    b, n = cls_logits.shape
    device = cls_logits.device
    dtype = cls_logits.dtype
    total_pos = max(1, sum(a.n_positive for a in assignments))

    reg_loss = cls_logits.new_zeros(())
    cls_targets = torch.zeros((b, n), dtype=dtype, device=device)
    cls_weights = torch.ones((b, n), dtype=dtype, device=device)
    for i, asg in enumerate(assignments):
        if asg.n_anchors != n:
            raise ValueError("assignment/anchor count mismatch")
        if len(asg.ignore_idx):
            cls_weights[i, torch.from_numpy(asg.ignore_idx)] = 0.0
        if asg.n_positive == 0:
            continue
        fg = torch.from_numpy(asg.fg_idx).to(device)
        pred = box_deltas[i, fg]
        tgt = torch.from_numpy(asg.fg_deltas).to(device=device, dtype=dtype)
        w = torch.from_numpy(asg.fg_weight).to(device=device, dtype=dtype)
        reg_loss = reg_loss + (smooth_l1(pred - tgt).sum(dim=1) * w).sum()
        if cls_target_mode == "quality":
            decoded = anchors.decode(
                pred.detach().cpu().numpy().astype(np.float64), asg.fg_idx)
            q = quality_targets(decoded, asg.fg_boxes)
        else:
            q = np.ones(asg.n_positive)
        cls_targets[i, fg] = torch.from_numpy(q).to(device=device,
                                                    dtype=dtype)
        cls_weights[i, fg] = w
    cls_loss = (qfl(cls_targets, logit=cls_logits, beta=beta)
                * cls_weights).sum() / total_pos
    reg_loss = reg_loss / total_pos
    return reg_loss + cls_loss, {"reg": reg_loss, "cls": cls_loss}
