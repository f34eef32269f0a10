"""LiDAR-based teacher detector: pillar-mean voxel encoding, BEV collapse,
shared BEV backbone and anchor head. Frozen at distillation time."""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn as nn

from ..geometry import VoxelGridSpec, voxelize
from ..geometry.boxes import Box3D, rotated_nms
from ..netblocks import AnchorGrid, BEVBackbone, DetectionHead

POINT_FEATURES = 4   # x, y, z offsets from the voxel center + intensity


def pillar_mean_features(points: np.ndarray, grid: VoxelGridSpec):
    """Per-voxel mean point features on the dense grid.

    points: (N, 4) with (x, y, z, intensity). Returns (features
    (4, Z, X, Y) float32 of mean (dx, dy, dz, intensity), occupancy
    (Z, X, Y) float32 in {0, 1}). Empty voxels are all zero. Accumulation
    runs in float64, so the result is independent of point order.
    """
    nx, ny, nz = grid.counts
    feats = np.zeros((POINT_FEATURES, nz, nx, ny), np.float64)
    count = np.zeros((nz, nx, ny), np.float64)
    pts = np.asarray(points, np.float64).reshape(-1, 4)
    if len(pts):
        idx, inside = voxelize(pts, grid)
        pts = pts[inside]
        idx = idx[inside]
        if len(pts):
            centers = grid.cell_center(idx)
            offsets = pts[:, :3] - centers
            lin = (idx[:, 2] * nx + idx[:, 0]) * ny + idx[:, 1]
            flat = feats.reshape(POINT_FEATURES, -1)
            np.add.at(flat[0], lin, offsets[:, 0])
            np.add.at(flat[1], lin, offsets[:, 1])
            np.add.at(flat[2], lin, offsets[:, 2])
            np.add.at(flat[3], lin, pts[:, 3])
            np.add.at(count.reshape(-1), lin, 1.0)
    denom = np.maximum(count, 1.0)
    feats /= denom[None]
    occupancy = (count > 0).astype(np.float32)
    return feats.astype(np.float32), occupancy


def collapse_to_bev(voxel_features: torch.Tensor) -> torch.Tensor:
    """Stack the height dimension into channels, value-preserving.

    (B, C, Z, X, Y) -> (B, Z*C, X, Y); element (c, iz, ix, iy) lands in
    channel iz * C + c.
    """
    b, c, z, x, y = voxel_features.shape
    return voxel_features.permute(0, 2, 1, 3, 4).reshape(b, z * c, x, y)


class VoxelEncoder(nn.Module):
    """Shared per-voxel MLP over mean point features ("pillar" style)."""

    def __init__(self, c_voxel: int = 4):
        super().__init__()
        self.c_voxel = c_voxel
        self.mlp = nn.Sequential(
            nn.Conv3d(POINT_FEATURES, c_voxel, 1),
            nn.ReLU(inplace=True),
            nn.Conv3d(c_voxel, c_voxel, 1),
        )

    def init_identity(self):
        """Identity-initialize both layers (requires c_voxel == 4)."""
        if self.c_voxel != POINT_FEATURES:
            raise ValueError("identity init needs c_voxel == 4")
        with torch.no_grad():
            for layer in (self.mlp[0], self.mlp[2]):
                layer.weight.zero_()
                for i in range(POINT_FEATURES):
                    layer.weight[i, i, 0, 0, 0] = 1.0
                layer.bias.zero_()

    def forward(self, mean_features: torch.Tensor,
                occupancy: torch.Tensor) -> torch.Tensor:
        """(B, 4, Z, X, Y) mean features -> (B, C_v, Z, X, Y); empty voxels
        stay exactly zero."""
        return self.mlp(mean_features) * occupancy.unsqueeze(1)


class TeacherNet(nn.Module):
    """Voxel encode -> BEV collapse -> BEV backbone -> anchor head.

    The BEV feature map exposed for distillation is tapped right after the
    collapse, before the BEV backbone.
    """

    SCORE_FLOOR = 0.1
    NMS_IOU = 0.5
    PRE_NMS_TOP_K = 512

    def __init__(self, grid: VoxelGridSpec, anchors: AnchorGrid,
                 c_voxel: int = 4, stage_channels=(48, 64),
                 decode_channels: int = 56, head_channels: int = 64,
                 normalization: str = "batch"):
        super().__init__()
        self.grid = grid
        self.anchors = anchors
        self.encoder = VoxelEncoder(c_voxel)
        z = grid.counts[2]
        self.bev_channels = z * c_voxel
        self.bev_backbone = BEVBackbone(
            self.bev_channels, stage_channels=stage_channels,
            decode_channels=decode_channels, out_channels=head_channels,
            normalization=normalization)
        self.head = DetectionHead(head_channels,
                                  anchors_per_cell=anchors.n_planes)

    def bev_features(self, mean_features: torch.Tensor,
                     occupancy: torch.Tensor) -> torch.Tensor:
        """(B, Z*C_v, X, Y) LiDAR BEV map (the distillation tap point)."""
        return collapse_to_bev(self.encoder(mean_features, occupancy))

    def forward(self, mean_features: torch.Tensor, occupancy: torch.Tensor):
        """Returns (bev (B, Z*C_v, X, Y), cls_logits (B, N),
        box_deltas (B, N, 8))."""
        bev = self.bev_features(mean_features, occupancy)
        cls_logits, box_deltas = self.head(self.bev_backbone(bev))
        return bev, cls_logits, box_deltas

    def encode_points(self, points: np.ndarray, device=None):
        """Numpy point cloud -> (mean features, occupancy) batch-1 tensors."""
        feats, occ = pillar_mean_features(points, self.grid)
        t = torch.from_numpy(feats).unsqueeze(0)
        o = torch.from_numpy(occ).unsqueeze(0)
        if device is not None:
            t = t.to(device)
            o = o.to(device)
        return t, o

    def decode_detections(self, cls_logits: torch.Tensor,
                          box_deltas: torch.Tensor) -> list[Box3D]:
        """Scores, floor, rotated NMS -> boxes for one frame."""
        scores = torch.sigmoid(cls_logits.detach()).cpu().numpy().ravel()
        deltas = box_deltas.detach().cpu().numpy().reshape(-1, 8)
        keep = np.flatnonzero(scores >= self.SCORE_FLOOR)
        if len(keep) == 0:
            return []
        if len(keep) > self.PRE_NMS_TOP_K:
            order = np.argsort(-scores[keep], kind="stable")
            keep = keep[order[:self.PRE_NMS_TOP_K]]
        boxes = self.anchors.decode(deltas[keep], keep)
        kept = rotated_nms(boxes, scores[keep], self.NMS_IOU)
        out = []
        for k in kept:
            b = boxes[k]
            out.append(Box3D(
                x=b[0], y=b[1], z=b[2], h=b[3], w=b[4], l=b[5], yaw=b[6],
                class_id=int(self.anchors.class_of_anchor[keep[k]]),
                score=float(scores[keep[k]])))
        return out

    @torch.no_grad()
    def predict(self, points: np.ndarray):
        """Inference on one point cloud: (BEV features (Z*C_v, X, Y) tensor,
        detections). Empty clouds give zero detections."""
        was_training = self.training
        self.eval()
        try:
            feats, occ = self.encode_points(points)
            bev, cls_logits, box_deltas = self.forward(feats, occ)
            dets = self.decode_detections(cls_logits[0], box_deltas[0])
        finally:
            self.train(was_training)
        return bev[0], dets

    def config(self) -> dict:
        return {
            "c_voxel": self.encoder.c_voxel,
            "stage_channels": list(self.bev_backbone.config["stage_channels"]),
            "decode_channels": self.bev_backbone.config["decode_channels"],
            "head_channels": self.bev_backbone.config["out_channels"],
            "anchors_per_cell": self.head.anchors_per_cell,
        }
