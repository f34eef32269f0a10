"""Differentiable network building blocks, anchors, and checkpoint IO."""

from .anchors import AnchorGrid
from .blocks import (
    BEVBackbone,
    BlockConfig,
    ChannelReduce,
    DepthDistributionHead,
    DetectionHead,
    SelfCalibratedBlock,
    TinyImageBackbone,
    conv_block,
)
from .checkpoint import (
    checkpoint_hash,
    load_checkpoint,
    load_into,
    save_checkpoint,
    state_arrays,
    transfer_prefixed,
)
from .gradcheck import finite_diff_check, weighted_sum

__all__ = [
    "AnchorGrid",
    "BEVBackbone",
    "BlockConfig",
    "ChannelReduce",
    "DepthDistributionHead",
    "DetectionHead",
    "SelfCalibratedBlock",
    "TinyImageBackbone",
    "checkpoint_hash",
    "conv_block",
    "finite_diff_check",
    "load_checkpoint",
    "load_into",
    "save_checkpoint",
    "state_arrays",
    "transfer_prefixed",
    "weighted_sum",
]
