"""Oriented 3D boxes and rotated-overlap math.

Boxes live in the LiDAR frame: x forward, y left, z up. ``l`` extends along
the heading axis at yaw 0, ``w`` across it, ``h`` vertically; ``(x, y, z)``
is the geometric center. Yaw is counterclockwise about +z and normalized to
(-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..kernels import _scalar

TWO_PI = 2.0 * math.pi


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = (yaw + math.pi) % TWO_PI - math.pi
    if r == -math.pi:
        r = math.pi
    return r


@dataclass(frozen=True)
class Box3D:
    """7-DoF oriented box plus class id and confidence score."""

    x: float
    y: float
    z: float
    h: float
    w: float
    l: float
    yaw: float
    class_id: int = 0
    score: float = 1.0

    def __post_init__(self):
        if not (self.h > 0 and self.w > 0 and self.l > 0):
            raise ValueError(f"box sizes must be positive, got "
                             f"h={self.h}, w={self.w}, l={self.l}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        object.__setattr__(self, "yaw", normalize_yaw(float(self.yaw)))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], np.float64)

    @property
    def size(self) -> tuple[float, float, float]:
        return (self.h, self.w, self.l)

    def corners_bev(self) -> np.ndarray:
        """Footprint corners, (4, 2), counterclockwise."""
        xs = np.empty(4, np.float64)
        ys = np.empty(4, np.float64)
        _scalar.box_corners_bev(self.x, self.y, self.w, self.l, self.yaw,
                                xs, ys)
        return np.stack([xs, ys], axis=1)

    def as_array(self) -> np.ndarray:
        """(x, y, z, h, w, l, yaw, class_id, score) float64 row."""
        return np.array([self.x, self.y, self.z, self.h, self.w, self.l,
                         self.yaw, float(self.class_id), self.score],
                        np.float64)


def boxes_to_array(boxes) -> np.ndarray:
    """Stack boxes into an (N, 9) float64 array (empty -> (0, 9))."""
    if len(boxes) == 0:
        return np.zeros((0, 9), np.float64)
    return np.stack([b.as_array() for b in boxes])


def array_to_boxes(arr) -> list[Box3D]:
    return [Box3D(x=r[0], y=r[1], z=r[2], h=r[3], w=r[4], l=r[5], yaw=r[6],
                  class_id=int(round(r[7])) if len(r) > 7 else 0,
                  score=float(r[8]) if len(r) > 8 else 1.0)
            for r in np.asarray(arr, np.float64)]


def bev_view(arr: np.ndarray) -> np.ndarray:
    """(N, >=7) full-box rows -> (N, 5) BEV rows (x, y, w, l, yaw)."""
    arr = np.asarray(arr, np.float64)
    if arr.ndim != 2 or arr.shape[1] < 7:
        raise ValueError("expected (N, >=7) box array")
    return np.ascontiguousarray(arr[:, [0, 1, 4, 5, 6]])


def rotated_iou_bev(a: Box3D, b: Box3D) -> float:
    """Exact rotated-footprint IoU via convex polygon clipping."""
    return float(kernels.iou_bev_pair(a.x, a.y, a.w, a.l, a.yaw,
                                      b.x, b.y, b.w, b.l, b.yaw))


def iou_3d(a: Box3D, b: Box3D) -> float:
    """3D IoU: BEV intersection area times vertical overlap, over volume
    union."""
    return float(kernels.iou_3d_pair(a.as_array()[:7], b.as_array()[:7]))


def iou_bev_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """Pairwise rotated BEV IoU for (N, >=7) x (M, >=7) box arrays."""
    return kernels.iou_bev_matrix(bev_view(boxes_a), bev_view(boxes_b))


def iou_3d_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(boxes_a, np.float64)[:, :7])
    b = np.ascontiguousarray(np.asarray(boxes_b, np.float64)[:, :7])
    return kernels.iou_3d_matrix(a, b)


def rotated_nms(boxes: np.ndarray, scores: np.ndarray,
                iou_threshold: float) -> np.ndarray:
    """Greedy BEV rotated NMS.

    Returns indices of kept boxes ordered by descending score; score ties
    break on the lower original index, so the result is deterministic.
    """
    boxes = np.asarray(boxes, np.float64)
    scores = np.asarray(scores, np.float64)
    if boxes.shape[0] == 0:
        return np.zeros(0, np.int64)
    order = np.argsort(-scores, kind="stable").astype(np.int64)
    keep = kernels.nms_rotated(bev_view(boxes), order, float(iou_threshold))
    return order[keep[order]]
