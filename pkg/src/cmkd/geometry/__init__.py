"""Calibration, grids, oriented boxes, and overlap math."""

from .boxes import (
    Box3D,
    array_to_boxes,
    bev_view,
    boxes_to_array,
    iou_3d,
    iou_3d_matrix,
    iou_bev_matrix,
    normalize_yaw,
    rotated_iou_bev,
    rotated_nms,
)
from .calib import Calibration, forward_facing_calibration, project_to_image
from .grids import (
    DepthBinSpec,
    VoxelGridSpec,
    depth_bin_edges,
    depth_to_bin_coord,
    frustum_sampling_coords,
    voxelize,
)

__all__ = [
    "Box3D",
    "Calibration",
    "DepthBinSpec",
    "VoxelGridSpec",
    "array_to_boxes",
    "bev_view",
    "boxes_to_array",
    "depth_bin_edges",
    "depth_to_bin_coord",
    "forward_facing_calibration",
    "frustum_sampling_coords",
    "iou_3d",
    "iou_3d_matrix",
    "iou_bev_matrix",
    "normalize_yaw",
    "project_to_image",
    "rotated_iou_bev",
    "rotated_nms",
    "voxelize",
]
