"""Numba backend: the scalar kernels compiled with @njit(cache=True).

Each function from ``_scalar`` is cloned into a private globals dict and
jitted there, so cross-calls between kernels resolve to the compiled
versions while the interpreted originals in ``_scalar`` stay untouched for
the numpy backend.
"""

import types

import numba

from . import _scalar

_NAMES = (
    "box_corners_bev",
    "polygon_area",
    "_clip_by_edge",
    "rect_intersection_area",
    "_bev_less",
    "iou_bev_pair",
    "_full_less",
    "iou_3d_pair",
    "iou_bev_matrix",
    "iou_3d_matrix",
    "nms_rotated",
    "voxelize_points",
    "point_counts_in_boxes",
    "raycast_scene",
)

_shared_globals = dict(_scalar.__dict__)

for _name in _NAMES:
    _src = getattr(_scalar, _name)
    _clone = types.FunctionType(
        _src.__code__, _shared_globals, _name, _src.__defaults__,
        _src.__closure__)
    _jitted = numba.njit(cache=True, fastmath=False)(_clone)
    _shared_globals[_name] = _jitted
    globals()[_name] = _jitted
