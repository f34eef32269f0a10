"""LiDAR-based teacher detector."""

from .model import (
    TeacherNet,
    VoxelEncoder,
    collapse_to_bev,
    pillar_mean_features,
)

__all__ = [
    "TeacherNet",
    "VoxelEncoder",
    "collapse_to_bev",
    "pillar_mean_features",
]
