"""Anchor grid over the BEV plane, with box delta encoding/decoding.

Deltas are (dx, dy, dz, dlog h, dlog w, dlog l, sin dyaw, cos dyaw): center
offsets normalized by the anchor BEV diagonal (z by anchor height), log
size ratios, and the yaw offset as a unit-circle pair. Decoding uses atan2,
so an all-zero delta vector reproduces the anchor box exactly.
"""

from __future__ import annotations

import math

import numpy as np

from ..geometry import VoxelGridSpec
from ..geometry.boxes import normalize_yaw


class AnchorGrid:
    """One anchor per BEV cell per (size prior, yaw).

    boxes: (N, 7) float64 with flat index a * X * Y + ix * Y + iy where a
    enumerates (prior, yaw) pairs prior-major. ``class_ids[a]`` gives the
    class of each anchor plane.
    """

    def __init__(self, grid: VoxelGridSpec,
                 size_priors: list[tuple[float, float, float]],
                 z_centers: list[float],
                 yaws: tuple[float, ...] = (0.0, math.pi / 2),
                 class_ids: list[int] | None = None):
        if len(z_centers) != len(size_priors):
            raise ValueError("need one z center per size prior")
        nx, ny, _ = grid.counts
        ox, oy, _ = grid.origin
        vx, vy, _ = grid.voxel_size
        cx = ox + (np.arange(nx) + 0.5) * vx
        cy = oy + (np.arange(ny) + 0.5) * vy
        gx, gy = np.meshgrid(cx, cy, indexing="ij")

        planes = []
        plane_classes = []
        for p, (h, w, l) in enumerate(size_priors):
            for yaw in yaws:
                plane = np.empty((nx, ny, 7))
                plane[..., 0] = gx
                plane[..., 1] = gy
                plane[..., 2] = z_centers[p]
                plane[..., 3] = h
                plane[..., 4] = w
                plane[..., 5] = l
                plane[..., 6] = yaw
                planes.append(plane.reshape(-1, 7))
                plane_classes.append(
                    class_ids[p] if class_ids is not None else p)
        self.grid = grid
        self.yaws = tuple(yaws)
        self.n_planes = len(planes)
        self.boxes = np.concatenate(planes, axis=0)
        self.plane_class_ids = np.asarray(plane_classes, np.int64)
        self.class_of_anchor = np.repeat(self.plane_class_ids, nx * ny)
        self.diag = np.sqrt(self.boxes[:, 4] ** 2 + self.boxes[:, 5] ** 2)

    def __len__(self) -> int:
        return self.boxes.shape[0]

    def encode(self, targets: np.ndarray, anchor_idx: np.ndarray) -> np.ndarray:
        """Encode (M, 7) target boxes against the anchors at anchor_idx."""
        targets = np.asarray(targets, np.float64).reshape(-1, 7)
        a = self.boxes[anchor_idx]
        d = self.diag[anchor_idx]
        out = np.empty((len(targets), 8))
        out[:, 0] = (targets[:, 0] - a[:, 0]) / d
        out[:, 1] = (targets[:, 1] - a[:, 1]) / d
        out[:, 2] = (targets[:, 2] - a[:, 2]) / a[:, 3]
        out[:, 3] = np.log(targets[:, 3] / a[:, 3])
        out[:, 4] = np.log(targets[:, 4] / a[:, 4])
        out[:, 5] = np.log(targets[:, 5] / a[:, 5])
        dyaw = targets[:, 6] - a[:, 6]
        out[:, 6] = np.sin(dyaw)
        out[:, 7] = np.cos(dyaw)
        return out

    def decode(self, deltas: np.ndarray, anchor_idx: np.ndarray) -> np.ndarray:
        """Decode (M, 8) deltas at anchor_idx back to (M, 7) boxes."""
        deltas = np.asarray(deltas, np.float64).reshape(-1, 8)
        a = self.boxes[anchor_idx]
        d = self.diag[anchor_idx]
        out = np.empty((len(deltas), 7))
        out[:, 0] = deltas[:, 0] * d + a[:, 0]
        out[:, 1] = deltas[:, 1] * d + a[:, 1]
        out[:, 2] = deltas[:, 2] * a[:, 3] + a[:, 2]
        out[:, 3] = np.exp(deltas[:, 3]) * a[:, 3]
        out[:, 4] = np.exp(deltas[:, 4]) * a[:, 4]
        out[:, 5] = np.exp(deltas[:, 5]) * a[:, 5]
        yaw = np.arctan2(deltas[:, 6], deltas[:, 7]) + a[:, 6]
        out[:, 6] = [normalize_yaw(v) for v in yaw]
        return out
