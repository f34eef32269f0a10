"""Feature- and response-level knowledge distillation losses."""

from __future__ import annotations

import numpy as np
import torch

from .assign import (
    NEG_IOU,
    POS_IOU,
    AnchorAssignment,
    assign_anchors,
    detection_loss,
    quality_targets,
)
from .losses import feature_distill_loss, qfl, smooth_l1
from .softlabels import (
    SoftLabel,
    SoftLabelCache,
    generate_soft_labels,
    soft_labels_to_array,
)


def select_supervision(hard_labels: np.ndarray | None,
                       soft_labels: np.ndarray | None,
                       hard_mode: bool) -> np.ndarray:
    """Supervision-source selector for the response loss.

    Hard mode consumes hard labels with unit confidence; soft mode consumes
    teacher soft labels whose score column carries s. Both return (N, 9)
    rows ready for :func:`assign_anchors`.
    """
    if hard_mode:
        if hard_labels is None:
            raise ValueError("hard supervision requested but no hard labels")
        rows = np.asarray(hard_labels, np.float64).reshape(-1, 9).copy()
        rows[:, 8] = 1.0
        return rows
    if soft_labels is None:
        raise ValueError("soft supervision requested but no soft labels")
    return np.asarray(soft_labels, np.float64).reshape(-1, 9)


def combine_student_loss(feat_loss: torch.Tensor | None,
                         response_loss: torch.Tensor | None,
                         depth_loss: torch.Tensor | None = None,
                         use_depth: bool = False):
    """Total student loss: feature term plus response term, unit weights,
    with an optional additive depth-supervision term.

    Returns (total, parts dict of detached floats for logging)."""
    terms = []
    parts = {}
    if feat_loss is not None:
        terms.append(feat_loss)
        parts["feat"] = float(feat_loss.detach())
    if response_loss is not None:
        terms.append(response_loss)
        parts["res"] = float(response_loss.detach())
    if use_depth:
        if depth_loss is None:
            raise ValueError("depth term enabled but no depth loss given")
        terms.append(depth_loss)
        parts["depth"] = float(depth_loss.detach())
    if not terms:
        raise ValueError("student loss has no active terms")
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    parts["total"] = float(total.detach())
    return total, parts


__all__ = [
    "AnchorAssignment",
    "NEG_IOU",
    "POS_IOU",
    "SoftLabel",
    "SoftLabelCache",
    "assign_anchors",
    "combine_student_loss",
    "detection_loss",
    "feature_distill_loss",
    "generate_soft_labels",
    "qfl",
    "quality_targets",
    "select_supervision",
    "smooth_l1",
    "soft_labels_to_array",
]
