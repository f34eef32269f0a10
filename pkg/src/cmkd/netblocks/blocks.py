"""Differentiable building blocks shared by the teacher and the student."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

NORMS = ("batch", "none")
ACTIVATIONS = ("relu",)


@dataclass(frozen=True)
class BlockConfig:
    """Declarative recipe for a conv stack.

    ``expected_stride`` is the declared total spatial stride; construction
    fails if the stride plan does not compose to it.
    """

    channels: tuple[int, ...]
    strides: tuple[int, ...]
    kernel_sizes: tuple[int, ...] = ()
    normalization: str = "batch"
    activation: str = "relu"
    expected_stride: int = 0

    def __post_init__(self):
        if len(self.channels) == 0:
            raise ValueError("need at least one stage")
        if any(c < 1 for c in self.channels):
            raise ValueError("channel counts must be >= 1")
        ks = self.kernel_sizes or tuple(3 for _ in self.channels)
        if len(ks) != len(self.channels) or len(self.strides) != len(self.channels):
            raise ValueError("channels/strides/kernel_sizes length mismatch")
        if any(k % 2 == 0 for k in ks):
            raise ValueError("kernel sizes must be odd")
        if self.normalization not in NORMS:
            raise ValueError(f"normalization must be one of {NORMS}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        object.__setattr__(self, "kernel_sizes", ks)
        total = math.prod(self.strides)
        if self.expected_stride and total != self.expected_stride:
            raise ValueError(
                f"stride plan composes to {total}, declared "
                f"{self.expected_stride}")


def conv_block(cin: int, cout: int, kernel: int = 3, stride: int = 1,
               normalization: str = "batch", act: bool = True) -> nn.Sequential:
    layers: list[nn.Module] = [
        nn.Conv2d(cin, cout, kernel, stride=stride, padding=kernel // 2,
                  bias=(normalization == "none"))]
    if normalization == "batch":
        layers.append(nn.BatchNorm2d(cout))
    if act:
        layers.append(nn.ReLU(inplace=True))
    return nn.Sequential(*layers)


def conv_stack(cin: int, cfg: BlockConfig) -> nn.Sequential:
    blocks = []
    prev = cin
    for cout, stride, kernel in zip(cfg.channels, cfg.strides,
                                    cfg.kernel_sizes):
        blocks.append(conv_block(prev, cout, kernel, stride,
                                 cfg.normalization))
        prev = cout
    return nn.Sequential(*blocks)


class TinyImageBackbone(nn.Module):
    """Small strided conv backbone for single-channel images.

    Produces an intermediate feature map at stride 4 and an output feature
    map at stride 8. The input size must divide by the total stride; this is
    checked at construction from the declared image size.
    """

    STRIDE_MID = 4
    STRIDE_OUT = 8

    def __init__(self, image_size: tuple[int, int], in_channels: int = 1,
                 feat_channels: int = 32, out_channels: int = 48,
                 normalization: str = "batch"):
        super().__init__()
        w, h = image_size
        if w % self.STRIDE_OUT or h % self.STRIDE_OUT:
            raise ValueError(
                f"image size {image_size} not divisible by total stride "
                f"{self.STRIDE_OUT}")
        self.image_size = (int(w), int(h))
        self.feat_channels = feat_channels
        self.out_channels = out_channels
        stem_ch = max(8, feat_channels // 2)
        self.stem = conv_stack(in_channels, BlockConfig(
            channels=(stem_ch, feat_channels, feat_channels),
            strides=(2, 2, 1), normalization=normalization,
            expected_stride=self.STRIDE_MID))
        self.out_block = conv_stack(feat_channels, BlockConfig(
            channels=(out_channels, out_channels), strides=(2, 1),
            normalization=normalization, expected_stride=2))

    @property
    def feature_size(self) -> tuple[int, int]:
        """(W_I, H_I) spatial size of the intermediate feature map."""
        return (self.image_size[0] // self.STRIDE_MID,
                self.image_size[1] // self.STRIDE_MID)

    def forward(self, image: torch.Tensor):
        f_mid = self.stem(image)
        f_out = self.out_block(f_mid)
        return f_mid, f_out


class ChannelReduce(nn.Module):
    """1x1 projection to the reduced channel count; spatial size kept."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.proj = nn.Conv2d(in_channels, out_channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.proj(x)


class DepthDistributionHead(nn.Module):
    """Per-pixel categorical depth distribution over n_bins bins.

    Runs on the backbone output feature map and upsamples back to the
    intermediate feature resolution, so the distribution aligns with the
    reduced image features pixel for pixel.
    """

    def __init__(self, in_channels: int, n_bins: int,
                 upsample_factor: int = 2, normalization: str = "batch"):
        super().__init__()
        self.n_bins = n_bins
        self.upsample_factor = upsample_factor
        self.body = conv_block(in_channels, in_channels,
                               normalization=normalization)
        self.logit = nn.Conv2d(in_channels, n_bins, 1)

    def forward_logits(self, f_out: torch.Tensor) -> torch.Tensor:
        x = self.body(f_out)
        if self.upsample_factor != 1:
            x = F.interpolate(x, scale_factor=self.upsample_factor,
                              mode="bilinear", align_corners=False)
        return self.logit(x)

    def forward(self, f_out: torch.Tensor) -> torch.Tensor:
        """(B, n_bins, H_I, W_I); every pixel sums to 1."""
        return torch.softmax(self.forward_logits(f_out), dim=1)


class SelfCalibratedBlock(nn.Module):
    """Split-channel block with a self-calibration gate on one half.

    One half is modulated by a sigmoid gate built from its own pooled
    context (pooling rate r), then refined by two convs; the other half
    passes through a plain conv. Halves are concatenated back, so the shape
    is preserved. Channel count must be even.
    """

    def __init__(self, channels: int, pool_rate: int = 4,
                 normalization: str = "batch"):
        super().__init__()
        if channels % 2:
            raise ValueError(f"channel count must be even, got {channels}")
        half = channels // 2
        self.pool_rate = pool_rate
        self.pool = nn.AvgPool2d(pool_rate, stride=pool_rate)
        self.calib_conv = conv_block(half, half, normalization=normalization,
                                     act=False)
        self.refine_a = conv_block(half, half, normalization=normalization)
        self.refine_b = conv_block(half, half, normalization=normalization)
        self.plain = conv_block(half, half, normalization=normalization)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        if h % self.pool_rate or w % self.pool_rate:
            raise ValueError(
                f"spatial size {(h, w)} not divisible by pooling rate "
                f"{self.pool_rate}")
        x1, x2 = torch.chunk(x, 2, dim=1)
        context = self.calib_conv(self.pool(x1))
        context = F.interpolate(context, size=(h, w), mode="bilinear",
                                align_corners=False)
        gate = torch.sigmoid(x1 + context)
        y1 = self.refine_b(self.refine_a(x1 * gate))
        y2 = self.plain(x2)
        return torch.cat([y1, y2], dim=1)


class BEVBackbone(nn.Module):
    """Multi-scale conv encoder-decoder over the BEV grid.

    Downsamples twice, decodes by upsampling and concatenation, and returns
    a feature map at the full BEV resolution. The teacher and the student
    instantiate this with identical configs so their weights interchange.
    """

    def __init__(self, in_channels: int, stage_channels=(48, 64),
                 decode_channels: int = 56, out_channels: int = 64,
                 normalization: str = "batch"):
        super().__init__()
        c1, c2 = stage_channels
        self.config = dict(in_channels=in_channels,
                           stage_channels=tuple(stage_channels),
                           decode_channels=decode_channels,
                           out_channels=out_channels,
                           normalization=normalization)
        self.down1 = conv_stack(in_channels, BlockConfig(
            channels=(c1, c1), strides=(2, 1), normalization=normalization,
            expected_stride=2))
        self.down2 = conv_stack(c1, BlockConfig(
            channels=(c2, c2), strides=(2, 1), normalization=normalization,
            expected_stride=2))
        self.fuse = conv_block(c1 + c2, decode_channels, kernel=1,
                               normalization=normalization)
        self.refine = conv_block(decode_channels, decode_channels,
                                 normalization=normalization)
        self.out = conv_block(decode_channels, out_channels, kernel=1,
                              normalization=normalization)

    def forward(self, bev: torch.Tensor) -> torch.Tensor:
        d1 = self.down1(bev)
        d2 = self.down2(d1)
        up = F.interpolate(d2, size=d1.shape[-2:], mode="bilinear",
                           align_corners=False)
        x = self.refine(self.fuse(torch.cat([d1, up], dim=1)))
        x = F.interpolate(x, size=bev.shape[-2:], mode="bilinear",
                          align_corners=False)
        return self.out(x)


class DetectionHead(nn.Module):
    """Per-anchor classification logit and 8-dim box deltas.

    One anchor per BEV cell per (size prior, yaw) combination. The flat
    anchor index is a * X * Y + ix * Y + iy, matching
    :class:`cmkd.netblocks.anchors.AnchorGrid`.
    """

    def __init__(self, in_channels: int, anchors_per_cell: int = 2):
        super().__init__()
        self.anchors_per_cell = anchors_per_cell
        self.cls = nn.Conv2d(in_channels, anchors_per_cell, 1)
        self.reg = nn.Conv2d(in_channels, anchors_per_cell * 8, 1)
        # start background-ish so early sigmoid scores sit near 0.01
        nn.init.constant_(self.cls.bias, -4.6)
        nn.init.normal_(self.cls.weight, std=0.01)
        nn.init.normal_(self.reg.weight, std=0.01)
        nn.init.zeros_(self.reg.bias)

    def forward(self, bev_features: torch.Tensor):
        """Returns (cls_logits (B, N), box_deltas (B, N, 8)) with
        N = anchors_per_cell * X * Y."""
        b = bev_features.shape[0]
        a = self.anchors_per_cell
        cls = self.cls(bev_features).reshape(b, -1)
        reg = self.reg(bev_features)
        x, y = reg.shape[-2:]
        reg = reg.reshape(b, a, 8, x, y).permute(0, 1, 3, 4, 2)
        return cls, reg.reshape(b, a * x * y, 8)
