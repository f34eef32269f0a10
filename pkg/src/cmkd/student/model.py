"""Monocular student detector.

Image -> backbone -> channel reduce + depth distribution -> outer-product
frustum -> trilinear resampling into the shared voxel grid -> BEV collapse
-> channel compression -> domain adaptation -> shared BEV backbone and
anchor head. Inference consumes only an image and its calibration; no point
cloud enters this path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..geometry import (
    Calibration,
    DepthBinSpec,
    VoxelGridSpec,
    depth_bin_edges,
    frustum_sampling_coords,
)
from ..geometry.boxes import Box3D, rotated_nms
from ..netblocks import (
    AnchorGrid,
    BEVBackbone,
    ChannelReduce,
    DepthDistributionHead,
    DetectionHead,
    SelfCalibratedBlock,
    TinyImageBackbone,
)
from ..teacher.model import collapse_to_bev

DA_BLOCK_COUNT = 5


def build_frustum(reduced: torch.Tensor,
                  depth_dist: torch.Tensor) -> torch.Tensor:
    """Outer product of per-pixel features and depth distributions.

    reduced: (B, C', H_I, W_I), depth_dist: (B, D, H_I, W_I). Returns
    (B, C', D, H_I, W_I) with values[c, d, v, u] =
    reduced[c, v, u] * depth_dist[d, v, u].
    """
    if reduced.shape[-2:] != depth_dist.shape[-2:] \
            or reduced.shape[0] != depth_dist.shape[0]:
        raise ValueError(
            f"spatial/batch mismatch: features {tuple(reduced.shape)} vs "
            f"depth {tuple(depth_dist.shape)}")
    return reduced.unsqueeze(2) * depth_dist.unsqueeze(1)


def sampling_grid_from_coords(coords: np.ndarray, valid: np.ndarray,
                              feature_size: tuple[int, int], n_bins: int):
    """Convert frustum coordinates to a normalized grid_sample grid.

    coords: (X, Y, Z, 3) float32 (u_f, v_f, d_f) from
    :func:`cmkd.geometry.frustum_sampling_coords`. Returns (grid
    (1, X, Y, Z, 3) float32 normalized for align_corners=False, valid
    (1, 1, X, Y, Z) float32 mask).
    """
    w_i, h_i = feature_size
    u = coords[..., 0]
    v = coords[..., 1]
    d = coords[..., 2]
    gx = 2.0 * (u + 0.5) / w_i - 1.0
    gy = 2.0 * (v + 0.5) / h_i - 1.0
    gz = 2.0 * d / n_bins - 1.0
    grid = np.stack([gx, gy, gz], axis=-1).astype(np.float32)
    grid[~valid] = -2.0
    return (torch.from_numpy(grid).unsqueeze(0),
            torch.from_numpy(valid.astype(np.float32))[None, None])


def frustum_to_voxels(frustum: torch.Tensor, grid: torch.Tensor,
                      valid: torch.Tensor) -> torch.Tensor:
    """Trilinear resampling of the frustum volume onto the voxel grid.

    frustum: (B, C, D, H_I, W_I); grid: (1 or B, X, Y, Z, 3) normalized
    sample locations; valid: broadcastable (.., X, Y, Z) mask. Returns
    (B, C, Z, X, Y) voxel features, zero outside the frustum. Gradients
    flow back into the frustum values.
    """
    b = frustum.shape[0]
    if grid.shape[0] == 1 and b > 1:
        grid = grid.expand(b, -1, -1, -1, -1)
    sampled = F.grid_sample(frustum, grid, mode="bilinear",
                            padding_mode="zeros", align_corners=False)
    sampled = sampled * valid
    # (B, C, X, Y, Z) -> (B, C, Z, X, Y)
    return sampled.permute(0, 1, 4, 2, 3)


def trilinear_reference(volume: np.ndarray, coords: np.ndarray,
                        valid: np.ndarray) -> np.ndarray:
    """Scalar reference for :func:`frustum_to_voxels` (test oracle).

    volume: (C, D, H, W); coords: (..., 3) (u_f, v_f, d_f); valid: (...,)
    bool. Samples with zero padding outside the volume; node i of the u/v
    axes sits at coordinate i, node k of the depth axis at k + 0.5.
    """
    c, nd, nh, nw = volume.shape
    flat = coords.reshape(-1, 3)
    vmask = valid.reshape(-1)
    out = np.zeros((len(flat), c), volume.dtype)
    for n, (u, v, d) in enumerate(flat):
        if not vmask[n]:
            continue
        x = float(u)
        y = float(v)
        z = float(d) - 0.5
        x0, y0, z0 = int(np.floor(x)), int(np.floor(y)), int(np.floor(z))
        fx, fy, fz = x - x0, y - y0, z - z0
        acc = np.zeros(c, volume.dtype)
        for dz_ in (0, 1):
            for dy_ in (0, 1):
                for dx_ in (0, 1):
                    xi, yi, zi = x0 + dx_, y0 + dy_, z0 + dz_
                    wgt = ((fx if dx_ else 1 - fx)
                           * (fy if dy_ else 1 - fy)
                           * (fz if dz_ else 1 - fz))
                    if 0 <= xi < nw and 0 <= yi < nh and 0 <= zi < nd:
                        acc = acc + wgt * volume[:, zi, yi, xi]
        out[n] = acc
    return out.reshape(coords.shape[:-1] + (c,))


class _DepthSupervisionStats:
    """Counts depth-loss calls that found no supervised pixels."""

    def __init__(self):
        self.empty_target_batches = 0

    def reset(self):
        self.empty_target_batches = 0


DEPTH_SUPERVISION_STATS = _DepthSupervisionStats()


def depth_targets(points: np.ndarray, calib: Calibration,
                  bins: DepthBinSpec, feature_size: tuple[int, int]):
    """Per-feature-pixel target depth bins from projected LiDAR points.

    The nearest (smallest camera depth) point wins a pixel; pixels with no
    projected point in [d_min, d_max] are unsupervised. Returns (target
    (H_I, W_I) int64, mask (H_I, W_I) bool).
    """
    w_i, h_i = feature_size
    w, h = calib.image_size
    target = np.zeros((h_i, w_i), np.int64)
    best = np.full((h_i, w_i), np.inf)
    uv, depth, valid = calib.project_to_image(
        np.asarray(points, np.float64)[:, :3])
    valid = valid & (depth >= bins.d_min) & (depth <= bins.d_max)
    if valid.any():
        ui = np.clip((uv[valid, 0] * (w_i / w)).astype(np.int64), 0, w_i - 1)
        vi = np.clip((uv[valid, 1] * (h_i / h)).astype(np.int64), 0, h_i - 1)
        dv = depth[valid]
        edges = depth_bin_edges(bins)
        bin_idx = np.clip(np.searchsorted(edges, dv, side="right") - 1,
                          0, bins.n_bins - 1)
        order = np.argsort(dv, kind="stable")[::-1]   # nearest written last
        best[vi[order], ui[order]] = dv[order]
        target[vi[order], ui[order]] = bin_idx[order]
    mask = np.isfinite(best)
    return target, mask


def depth_loss(depth_logits: torch.Tensor, targets: torch.Tensor,
               mask: torch.Tensor, gamma: float = 2.0) -> torch.Tensor:
    """Focal cross-entropy over depth bins, mean over supervised pixels.

    depth_logits: (B, D, H_I, W_I); targets: (B, H_I, W_I) int64; mask:
    (B, H_I, W_I) bool. With no supervised pixel anywhere, returns 0 and
    bumps ``DEPTH_SUPERVISION_STATS.empty_target_batches``.
    """
    if not bool(mask.any()):
        DEPTH_SUPERVISION_STATS.empty_target_batches += 1
        return depth_logits.sum() * 0.0
    logp = F.log_softmax(depth_logits, dim=1)
    logp_t = logp.gather(1, targets.unsqueeze(1)).squeeze(1)
    p_t = logp_t.exp()
    focal = -((1.0 - p_t) ** gamma) * logp_t
    return focal[mask].mean()


@dataclass
class StudentOutputs:
    bev_pre_da: torch.Tensor       # (B, C', X, Y) before domain adaptation
    bev_post_da: torch.Tensor      # (B, C', X, Y) distillation surface
    cls_logits: torch.Tensor       # (B, N)
    box_deltas: torch.Tensor       # (B, N, 8)
    depth_logits: torch.Tensor     # (B, D, H_I, W_I)


class StudentNet(nn.Module):
    """Monocular detector with the same BEV backbone/head as the teacher."""

    SCORE_FLOOR = 0.1
    NMS_IOU = 0.5
    PRE_NMS_TOP_K = 512

    def __init__(self, image_size: tuple[int, int], grid: VoxelGridSpec,
                 bins: DepthBinSpec, anchors: AnchorGrid,
                 c_reduced: int = 32, feat_channels: int = 32,
                 out_channels: int = 48, stage_channels=(48, 64),
                 decode_channels: int = 56, head_channels: int = 64,
                 use_domain_adapt: bool = True, normalization: str = "batch"):
        super().__init__()
        self.grid = grid
        self.bins = bins
        self.anchors = anchors
        self.c_reduced = c_reduced
        self.backbone = TinyImageBackbone(
            image_size, in_channels=1, feat_channels=feat_channels,
            out_channels=out_channels, normalization=normalization)
        self.reduce = ChannelReduce(feat_channels, c_reduced)
        self.depth_head = DepthDistributionHead(
            out_channels, bins.n_bins, upsample_factor=2,
            normalization=normalization)
        z = grid.counts[2]
        self.compress = ChannelReduce(z * c_reduced, c_reduced)
        if use_domain_adapt:
            self.da = nn.Sequential(*[
                SelfCalibratedBlock(c_reduced, normalization=normalization)
                for _ in range(DA_BLOCK_COUNT)])
        else:
            self.da = nn.Identity()
        self.bev_backbone = BEVBackbone(
            c_reduced, stage_channels=stage_channels,
            decode_channels=decode_channels, out_channels=head_channels,
            normalization=normalization)
        self.head = DetectionHead(head_channels,
                                  anchors_per_cell=anchors.n_planes)
        self._grid_cache: dict[bytes, tuple] = {}

    @property
    def feature_size(self) -> tuple[int, int]:
        return self.backbone.feature_size

    def sampling_grid(self, calib: Calibration):
        """Normalized grid_sample coordinates for one calibration, cached
        per unique calibration."""
        key = calib.to_text().encode()
        if key not in self._grid_cache:
            coords, valid = frustum_sampling_coords(
                self.grid, self.bins, calib, self.feature_size)
            self._grid_cache[key] = sampling_grid_from_coords(
                coords, valid, self.feature_size, self.bins.n_bins)
        return self._grid_cache[key]

    def bev_maps(self, image: torch.Tensor, grid: torch.Tensor,
                 valid: torch.Tensor):
        """Image batch -> (pre-DA BEV, post-DA BEV, depth logits)."""
        f_mid, f_out = self.backbone(image)
        reduced = self.reduce(f_mid)
        depth_logits = self.depth_head.forward_logits(f_out)
        depth_dist = torch.softmax(depth_logits, dim=1)
        frustum = build_frustum(reduced, depth_dist)
        voxels = frustum_to_voxels(frustum, grid, valid)
        stacked = collapse_to_bev(voxels)
        pre_da = self.compress(stacked)
        post_da = self.da(pre_da)
        return pre_da, post_da, depth_logits

    def forward(self, image: torch.Tensor, grid: torch.Tensor,
                valid: torch.Tensor) -> StudentOutputs:
        pre_da, post_da, depth_logits = self.bev_maps(image, grid, valid)
        cls_logits, box_deltas = self.head(self.bev_backbone(post_da))
        return StudentOutputs(bev_pre_da=pre_da, bev_post_da=post_da,
                              cls_logits=cls_logits, box_deltas=box_deltas,
                              depth_logits=depth_logits)

    def decode_detections(self, cls_logits: torch.Tensor,
                          box_deltas: torch.Tensor) -> list[Box3D]:
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
        return [Box3D(x=boxes[k][0], y=boxes[k][1], z=boxes[k][2],
                      h=boxes[k][3], w=boxes[k][4], l=boxes[k][5],
                      yaw=boxes[k][6],
                      class_id=int(self.anchors.class_of_anchor[keep[k]]),
                      score=float(scores[keep[k]]))
                for k in kept]

    @torch.no_grad()
    def predict(self, image: np.ndarray, calib: Calibration):
        """Monocular inference: (post-DA BEV (C', X, Y), detections).

        Takes only an image and its calibration; the signature is the
        structural guarantee that no point cloud is read at test time.
        """
        was_training = self.training
        self.eval()
        try:
            img = torch.from_numpy(
                np.asarray(image, np.float32).reshape(1, 1, *image.shape[:2]))
            grid, valid = self.sampling_grid(calib)
            out = self.forward(img, grid, valid)
            dets = self.decode_detections(out.cls_logits[0],
                                          out.box_deltas[0])
        finally:
            self.train(was_training)
        return out.bev_post_da[0], dets

    def config(self) -> dict:
        return {
            "c_reduced": self.c_reduced,
            "feat_channels": self.backbone.feat_channels,
            "out_channels": self.backbone.out_channels,
            "n_bins": self.bins.n_bins,
            "stage_channels": list(self.bev_backbone.config["stage_channels"]),
            "decode_channels": self.bev_backbone.config["decode_channels"],
            "head_channels": self.bev_backbone.config["out_channels"],
            "use_domain_adapt": not isinstance(self.da, nn.Identity),
            "anchors_per_cell": self.head.anchors_per_cell,
        }
