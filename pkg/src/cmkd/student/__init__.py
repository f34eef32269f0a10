"""Monocular student detector and depth supervision."""

from .model import (
    DA_BLOCK_COUNT,
    DEPTH_SUPERVISION_STATS,
    StudentNet,
    StudentOutputs,
    build_frustum,
    depth_loss,
    depth_targets,
    frustum_to_voxels,
    sampling_grid_from_coords,
    trilinear_reference,
)

__all__ = [
    "DA_BLOCK_COUNT",
    "DEPTH_SUPERVISION_STATS",
    "StudentNet",
    "StudentOutputs",
    "build_frustum",
    "depth_loss",
    "depth_targets",
    "frustum_to_voxels",
    "sampling_grid_from_coords",
    "trilinear_reference",
]
