"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is picked once at import from the ``CMKD_KERNELS`` env var:
``auto`` (default: numba if importable), ``numba``, or ``numpy``. Tests and
the kernel benchmark can switch at runtime with :func:`set_backend`. Both
backends execute the same arithmetic and produce bit-identical results.
"""

import os

from . import _numpy

_BACKENDS = {"numpy": _numpy}
_active = None


def _load_numba_backend():
    if "numba" not in _BACKENDS:
        from . import _numba
        _BACKENDS["numba"] = _numba
    return _BACKENDS["numba"]


def set_backend(name):
    """Select the kernel backend ("numba" or "numpy")."""
    global _active
    if name == "numba":
        _active = _load_numba_backend()
    elif name == "numpy":
        _active = _numpy
    else:
        raise ValueError(f"unknown kernel backend: {name!r}")


def active_backend():
    """Name of the backend currently in use."""
    return "numba" if _active is not _numpy else "numpy"


def _init_from_env():
    choice = os.environ.get("CMKD_KERNELS", "auto").lower()
    if choice == "numpy":
        set_backend("numpy")
    elif choice == "numba":
        set_backend("numba")
    elif choice == "auto":
        try:
            set_backend("numba")
        except ImportError:
            set_backend("numpy")
    else:
        raise ValueError(
            f"CMKD_KERNELS must be auto, numba or numpy, got {choice!r}")


def iou_bev_pair(*args):
    return _active.iou_bev_pair(*args)


def iou_3d_pair(*args):
    return _active.iou_3d_pair(*args)


def iou_bev_matrix(boxes_a, boxes_b):
    return _active.iou_bev_matrix(boxes_a, boxes_b)


def iou_3d_matrix(boxes_a, boxes_b):
    return _active.iou_3d_matrix(boxes_a, boxes_b)


def nms_rotated(boxes_bev, order, iou_threshold):
    return _active.nms_rotated(boxes_bev, order, iou_threshold)


def voxelize_points(points, origin, voxel_size, counts):
    return _active.voxelize_points(points, origin, voxel_size, counts)


def point_counts_in_boxes(points, boxes, cos_yaw, sin_yaw, inflate):
    return _active.point_counts_in_boxes(
        points, boxes, cos_yaw, sin_yaw, inflate)


def raycast_scene(dirs, cam_pos, boxes, cos_yaw, sin_yaw, ground_z, light,
                  ambient, diffuse, shade_far):
    return _active.raycast_scene(
        dirs, cam_pos, boxes, cos_yaw, sin_yaw, ground_z, light, ambient,
        diffuse, shade_far)


_init_from_env()
